"""Half-space kernels and their normalizing constants.

Boundary dimension n is odd, the extension lives on R^{n+1}_+ with
coordinates (x, y), y >= 0.  All constants are computed from ``gamma_fn``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, SingularPointError
from .specfun import gamma_fn


class KernelKind(str, enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    SCATTERING = "scattering"


@dataclass(frozen=True)
class KernelSpec:
    """Dimension, order and kind of a half-space kernel.

    Dirichlet and Neumann kinds are the gamma = n/2 members (the default when
    ``gamma`` is omitted); scattering kernels need 0 < gamma < n/2, gamma not
    an integer.
    """

    n: int
    gamma: Optional[float] = None
    kind: KernelKind = KernelKind.DIRICHLET

    def __post_init__(self):
        _check_odd(self.n)
        kind = KernelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        half = self.n / 2.0
        g = half if self.gamma is None else float(self.gamma)
        if not (0 < g <= half):
            raise DomainError(f"gamma must lie in (0, n/2], got {g}")
        if kind is KernelKind.SCATTERING:
            if g == half:
                raise DomainError("scattering kernels need gamma < n/2; use the Dirichlet or Neumann kind")
            if float(g).is_integer():
                raise DomainError("scattering kernels are undefined at integer gamma")
        elif g != half:
            raise DomainError(f"{kind.value} kernels are the gamma = n/2 case")
        object.__setattr__(self, "gamma", g)

    @property
    def m(self) -> int:
        return int(math.floor(self.gamma))


def _check_odd(n) -> int:
    if int(n) != n or n < 1 or int(n) % 2 == 0:
        raise DomainError(f"dimension must be an odd positive integer, got {n}")
    return int(n)


def kappa_n(n: int) -> float:
    """Dirichlet Poisson constant Gamma(n) / (Gamma(n/2) pi^{n/2})."""
    n = _check_odd(n)
    return gamma_fn(n) / (gamma_fn(n / 2.0) * math.pi ** (n / 2.0))


def kappa_tilde_n(n: int) -> float:
    """Neumann log-kernel constant 1 / (2^n Gamma(n/2) pi^{n/2})."""
    n = _check_odd(n)
    return 1.0 / (2.0 ** n * gamma_fn(n / 2.0) * math.pi ** (n / 2.0))


def kappa_n_gamma(n: int, gamma: float) -> float:
    """Scattering Poisson constant Gamma(n/2 + gamma) / (Gamma(gamma) pi^{n/2})."""
    n = _check_odd(n)
    if not (0 < gamma <= n / 2.0):
        raise DomainError("gamma must lie in (0, n/2]")
    return gamma_fn(n / 2.0 + gamma) / (gamma_fn(gamma) * math.pi ** (n / 2.0))


def kappa_tilde_n_gamma(n: int, gamma: float) -> float:
    """Neumann scattering constant Gamma(n/2 - gamma + 1) / (2^{2 gamma} pi^{n/2} Gamma(gamma)).

    Equals (n/2 - gamma) Gamma(n/2 - gamma) / (...) for gamma < n/2 and
    continues analytically to ``kappa_tilde_n`` at gamma = n/2.
    """
    n = _check_odd(n)
    if not (0 < gamma <= n / 2.0):
        raise DomainError("gamma must lie in (0, n/2]")
    return gamma_fn(n / 2.0 - gamma + 1.0) / (2.0 ** (2 * gamma) * math.pi ** (n / 2.0) * gamma_fn(gamma))


def d_gamma(gamma: float) -> float:
    """Scattering-to-operator constant 2^{2 gamma} Gamma(gamma) / Gamma(-gamma)."""
    if float(gamma).is_integer():
        raise DomainError("d_gamma has a pole at integer gamma")
    return 2.0 ** (2 * gamma) * gamma_fn(gamma) / gamma_fn(-gamma)


def d_tilde_gamma(gamma: float, m: Optional[int] = None) -> float:
    """Constant 2^{2 gamma} Gamma(gamma - m) / (gamma 2^{2m+1} m! Gamma(-gamma)), m = [gamma]."""
    if float(gamma).is_integer():
        raise DomainError("d_tilde_gamma has a pole at integer gamma")
    if m is None:
        m = int(math.floor(gamma))
    return (2.0 ** (2 * gamma) * gamma_fn(gamma - m)
            / (gamma * 2.0 ** (2 * m + 1) * math.factorial(m) * gamma_fn(-gamma)))


def _radius2(spec: KernelSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if spec.n == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        return x * x
    if x.shape[-1] != spec.n:
        raise DomainError(f"points must have last axis of length {spec.n}")
    return np.einsum("...i,...i->...", x, x)


def _check_corner(r2, y):
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise DomainError("kernels live on y >= 0")
    if np.any((r2 == 0) & (y == 0)):
        raise SingularPointError("kernel evaluated at the singular corner x = 0, y = 0")
    return y


def _out(v):
    v = np.asarray(v)
    return float(v) if v.ndim == 0 else v


def poisson_kernel(spec: KernelSpec, x, y):
    """Dirichlet kernel kappa_n y^n / (y^2 + |x|^2)^n.

    ``x`` has trailing axis n (a scalar is accepted for n = 1).
    """
    if spec.kind is not KernelKind.DIRICHLET:
        raise DomainError("poisson_kernel needs a Dirichlet KernelSpec")
    r2 = _radius2(spec, x)
    y = _check_corner(r2, y)
    n = spec.n
    return _out(kappa_n(n) * y ** n / (y * y + r2) ** n)


def neumann_kernel(spec: KernelSpec, x, y):
    """Neumann kernel kappa_tilde_n log(1 / (y^2 + |x|^2))."""
    if spec.kind is not KernelKind.NEUMANN:
        raise DomainError("neumann_kernel needs a Neumann KernelSpec")
    r2 = _radius2(spec, x)
    y = _check_corner(r2, y)
    return _out(-kappa_tilde_n(spec.n) * np.log(y * y + r2))


def scattering_kernel(spec: KernelSpec, x, y):
    """Scattering Poisson kernel kappa_{n,gamma} y^{n/2+gamma} / (y^2+|x|^2)^{n/2+gamma}.

    This reconstructs the scattering solution Phi = y^{n/2-gamma} U from its
    Dirichlet data, so its x-integral is y^{n/2-gamma}; the extension kernel
    y^{gamma-n/2} * K_gamma has unit mass at every height.
    """
    if spec.kind is not KernelKind.SCATTERING:
        raise DomainError("scattering_kernel needs a Scattering KernelSpec")
    r2 = _radius2(spec, x)
    y = _check_corner(r2, y)
    p = spec.n / 2.0 + spec.gamma
    return _out(kappa_n_gamma(spec.n, spec.gamma) * y ** p / (y * y + r2) ** p)


def neumann_scattering_kernel(spec: KernelSpec, x, y):
    """Normalized Neumann scattering kernel.

    kappa_tilde_{n,gamma}/(n/2-gamma) * y^{n/2-gamma} [(y^2+|x|^2)^{gamma-n/2} - 1];
    the subtracted multiple of y^{n/2-gamma} makes gamma -> n/2 converge to the
    Neumann log kernel.
    """
    if spec.kind is not KernelKind.SCATTERING:
        raise DomainError("neumann_scattering_kernel needs a Scattering KernelSpec")
    r2 = _radius2(spec, x)
    y = _check_corner(r2, y)
    a = spec.n / 2.0 - spec.gamma
    c = kappa_tilde_n_gamma(spec.n, spec.gamma) / a
    return _out(c * y ** a * np.expm1(-a * np.log(y * y + r2)))
