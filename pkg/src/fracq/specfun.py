"""Special functions: Gamma, the modified Bessel functions K and I, Bessel J.

Also numerical checks of three classical Bessel identities that underlie the
half-space kernel constants.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate

from .errors import DomainError, QuadratureError

# Lanczos approximation, g = 7, nine terms.
_LANCZOS_G = 7.0
_LANCZOS_P = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _sinpi(x: float) -> float:
    """sin(pi x) with exact zeros at the integers."""
    r = math.fmod(x, 2.0)
    if r < 0:
        r += 2.0
    if r == 0.0 or r == 1.0:
        return 0.0
    if r > 1.0:
        return -_sinpi(r - 1.0)
    if r > 0.5:
        r = 1.0 - r
    return math.sin(math.pi * r)


def _gamma_pos(x: float) -> float:
    # valid for x >= 0.5
    x -= 1.0
    a = _LANCZOS_P[0]
    t = x + _LANCZOS_G + 0.5
    for i in range(1, len(_LANCZOS_P)):
        a += _LANCZOS_P[i] / (x + i)
    return _SQRT_2PI * t ** (x + 0.5) * math.exp(-t) * a


def gamma_fn(x: float) -> float:
    """Gamma function for real arguments.

    Lanczos approximation for x >= 1/2, reflection formula below.

    Raises
    ------
    DomainError
        At the poles x = 0, -1, -2, ...
    """
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"gamma_fn needs a finite argument, got {x}")
    if x <= 0 and x == math.floor(x):
        raise DomainError(f"gamma_fn has a pole at {x}")
    if x < 0.5:
        return math.pi / (_sinpi(x) * _gamma_pos(1.0 - x))
    return _gamma_pos(x)


@dataclass(frozen=True)
class BesselOrder:
    """Real order gamma > 0 of a Bessel function."""

    gamma: float

    def __post_init__(self):
        g = float(self.gamma)
        if not math.isfinite(g) or g <= 0:
            raise DomainError(f"Bessel order must be finite and > 0, got {self.gamma}")
        object.__setattr__(self, "gamma", g)

    @property
    def half_integer(self) -> bool:
        return float(2 * self.gamma).is_integer() and not float(self.gamma).is_integer()


def _order(order) -> float:
    if isinstance(order, BesselOrder):
        return order.gamma
    return float(order)


_KSTEP = 0.1  # trapezoid step in t; error ~ exp(-2 pi^2 / (3 step))
_KCHUNK = 64


def bessel_k(order, z):
    """Modified Bessel function of the second kind K_gamma(z), z > 0.

    Uses K_gamma(z) = int_0^inf exp(-z cosh t) cosh(gamma t) dt, summed with the
    trapezoid rule (spectrally accurate for this doubly-exponentially decaying,
    analytic integrand). The sum is truncated once the integrand falls below
    1e-18 of the running sum past its peak.
    """
    g = abs(_order(order))  # K_{-g} = K_g
    za = np.asarray(z, dtype=float)
    if np.any(~np.isfinite(za)) or np.any(za <= 0):
        raise DomainError("bessel_k needs z > 0")
    flat = za.ravel()
    total = np.zeros_like(flat)
    # log of the integrand, shifted by a per-z reference to avoid overflow
    # at large orders and small z
    tpk = np.arcsinh(np.maximum(g, 1e-300) / flat)
    logref = -flat * np.cosh(tpk) + g * tpk
    active = np.ones(flat.shape, dtype=bool)
    start = 0
    while np.any(active):
        k = np.arange(start, start + _KCHUNK)
        t = k * _KSTEP
        zi = flat[active][:, None]
        lf = -zi * np.cosh(t)[None, :] + g * t[None, :] - logref[active][:, None]
        f = np.exp(lf) * 0.5 * (1.0 + np.exp(-2.0 * g * t))[None, :]
        if start == 0:
            f[:, 0] *= 0.5
        total[active] += f.sum(axis=1)
        past_peak = t[-1] > tpk[active]
        small = f[:, -1] < 1e-18 * total[active]
        done = past_peak & small
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        start += _KCHUNK
        if start > 200000:
            raise QuadratureError("bessel_k truncation did not terminate")
    out = _KSTEP * total * np.exp(logref)
    out = out.reshape(za.shape)
    return float(out) if out.ndim == 0 else out


def bessel_i(order, z):
    """Modified Bessel function of the first kind I_gamma(z) by its power series."""
    g = _order(order)
    za = np.asarray(z, dtype=float)
    if np.any(za < 0):
        raise DomainError("bessel_i implemented for z >= 0")
    flat = za.ravel()
    out = np.empty_like(flat)
    for i, zz in enumerate(flat):
        if zz == 0:
            out[i] = 1.0 if g == 0 else 0.0
            continue
        q = 0.25 * zz * zz
        term = (0.5 * zz) ** g / gamma_fn(g + 1.0)
        s = term
        k = 0
        while True:
            k += 1
            term *= q / (k * (k + g))
            s += term
            if term <= 1e-17 * s and k > q:
                break
        out[i] = s
    out = out.reshape(za.shape)
    return float(out) if out.ndim == 0 else out


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _panel_gl(f, a, b, npanel):
    """Composite Gauss-Legendre of f over [a, b] with npanel equal panels."""
    edges = np.linspace(a, b, npanel + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    w = (half[:, None] * _GL_W[None, :]).ravel()
    return float(np.dot(w, f(x)))


def bessel_j(order, z):
    """Bessel function of the first kind J_nu(z) for nu >= 0, z >= 0.

    Power series for z <= 2, otherwise Schlaefli's integral
        J_nu(z) = (1/pi) int_0^pi cos(nu th - z sin th) dth
                  - sin(nu pi)/pi int_0^inf exp(-z sinh t - nu t) dt,
    both pieces by composite Gauss-Legendre.
    """
    nu = _order(order)
    if nu < 0:
        raise DomainError("bessel_j implemented for order >= 0")
    za = np.asarray(z, dtype=float)
    if np.any(za < 0):
        raise DomainError("bessel_j implemented for z >= 0")
    flat = za.ravel()
    out = np.empty_like(flat)
    snu = _sinpi(nu)
    for i, zz in enumerate(flat):
        if zz == 0:
            out[i] = 1.0 if nu == 0 else 0.0
            continue
        if zz <= 2.0:
            # power series: no cancellation issue at small z, where the
            # integral form loses relative accuracy
            q = -0.25 * zz * zz
            term = (0.5 * zz) ** nu / gamma_fn(nu + 1.0)
            acc = term
            k = 0
            while abs(term) > 1e-17 * abs(acc) and term != 0:
                k += 1
                term *= q / (k * (k + nu))
                acc += term
            out[i] = acc
            continue
        npan = int(math.ceil((zz + nu) / 2.0)) + 2
        first = _panel_gl(lambda th: np.cos(nu * th - zz * np.sin(th)), 0.0, math.pi, npan) / math.pi
        second = 0.0
        if snu != 0.0:
            tmax = math.asinh(45.0 / zz)
            if nu > 0:
                tmax = min(tmax, 45.0 / nu)
            second = _panel_gl(lambda t: np.exp(-zz * np.sinh(t) - nu * t), 0.0, tmax,
                               int(math.ceil(tmax)) + 1)
            second *= snu / math.pi
        out[i] = first - second
    out = out.reshape(za.shape)
    return float(out) if out.ndim == 0 else out


def dirichlet_profile(gamma: float, z):
    """phi(z) = 2^{1-gamma} z^gamma K_gamma(z) / Gamma(gamma), with phi(0) = 1.

    Bounded decaying solution of phi'' + (1-2 gamma)/z phi' - phi = 0,
    phi(0) = 1; it is the Fourier multiplier of the gamma-extension.
    """
    g = float(gamma)
    if not (0 < g < 10):
        raise DomainError("dirichlet_profile needs gamma in (0, 10)")
    za = np.asarray(z, dtype=float)
    if np.any(za < 0):
        raise DomainError("dirichlet_profile needs z >= 0")
    out = np.ones_like(za)
    pos = za > 0
    if np.any(pos):
        zp = za[pos]
        out[pos] = 2.0 ** (1.0 - g) / gamma_fn(g) * zp ** g * bessel_k(g, zp)
    return float(out) if out.ndim == 0 else out


class IdentityCheck(NamedTuple):
    """Result of a numerical identity check."""

    residual: float
    error: float
    lhs: float
    rhs: float
    imag: float = 0.0


def verify_bessel_identity_1(gamma: float, a: float, z: float) -> IdentityCheck:
    """Basset-type integral for K_gamma(a z).

    K_gamma(az) = Gamma(gamma+1/2)(2z)^gamma / (sqrt(pi) a^gamma)
                  * int_0^inf cos(a t)/(t^2+z^2)^{gamma+1/2} dt.

    The Fourier integral is evaluated by QUADPACK's QAWF routine, which
    integrates between zeros of the cosine and accelerates the resulting
    alternating series with the epsilon algorithm.
    """
    if a <= 0 or z <= 0:
        raise DomainError("identity 1 is checked for real a > 0 and z > 0")
    p = gamma + 0.5
    with warnings.catch_warnings():
        # QAWF warns when a cycle misses 1e-13; its error estimate is reported
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(lambda t: (t * t + z * z) ** (-p), 0.0, np.inf,
                                  weight="cos", wvar=a, limlst=200, epsabs=1e-13)
    pref = gamma_fn(gamma + 0.5) * (2.0 * z) ** gamma / (math.sqrt(math.pi) * a ** gamma)
    lhs = bessel_k(gamma, a * z)
    rhs = pref * val
    return IdentityCheck(abs(lhs - rhs), abs(pref) * err, lhs, rhs)


def verify_bessel_identity_2(gamma: float, z: float) -> IdentityCheck:
    """Poisson integral for J_gamma.

    J_gamma(z) = z^gamma / (2^gamma sqrt(pi) Gamma(gamma+1/2))
                 * int_0^pi exp(i z cos th) sin^{2 gamma} th dth.

    The integration range is split at the zeros of cos(z cos th); the
    imaginary part of the integral is reported in ``imag``.
    """
    if gamma < 0 or z < 0:
        raise DomainError("identity 2 is checked for gamma >= 0, z >= 0")
    pts = []
    if z > 0:
        kmax = int(z / math.pi + 0.5)
        for k in range(-kmax - 1, kmax + 1):
            c = (k + 0.5) * math.pi / z
            if -1 < c < 1:
                pts.append(math.acos(c))
    pts = sorted(pts)
    edges = [0.0] + pts + [math.pi]
    re = im = err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        r, e1 = integrate.quad(lambda th: math.cos(z * math.cos(th)) * math.sin(th) ** (2 * gamma),
                               lo, hi, epsabs=1e-14, epsrel=1e-13, limit=200)
        # the imaginary part cancels between mirrored panels; ask only for
        # absolute accuracy
        i, e2 = integrate.quad(lambda th: math.sin(z * math.cos(th)) * math.sin(th) ** (2 * gamma),
                               lo, hi, epsabs=1e-13, epsrel=0.0, limit=200)
        re += r
        im += i
        err += e1 + e2
    pref = z ** gamma / (2.0 ** gamma * math.sqrt(math.pi) * gamma_fn(gamma + 0.5)) if z > 0 else (
        1.0 / (math.sqrt(math.pi) * gamma_fn(gamma + 0.5)) if gamma == 0 else 0.0)
    lhs = bessel_j(gamma, z)
    rhs = pref * re
    return IdentityCheck(abs(lhs - rhs), abs(pref) * err, lhs, rhs, abs(pref * im))


def verify_bessel_identity_3(mu: float, nu: float, a: float, b: float) -> IdentityCheck:
    """Weber-Sonine type integral

    int_0^inf r^{mu+nu+1} K_mu(a r) J_nu(b r) dr
        = (2a)^mu (2b)^nu Gamma(mu+nu+1) / (a^2+b^2)^{mu+nu+1}.

    The left side is integrated panel by panel (panels of length pi/b follow
    the oscillation of J_nu) until the exponential decay of K_mu makes the
    remaining panels negligible.
    """
    if a <= 0 or b < 0:
        raise DomainError("identity 3 is checked for a > 0, b >= 0")
    if mu + nu + 1 <= 0 or nu < 0:
        raise DomainError("identity 3 needs mu + nu + 1 > 0 and nu >= 0")
    s = mu + nu + 1
    rhs = (2 * a) ** mu * (2 * b) ** nu * gamma_fn(s) / (a * a + b * b) ** s
    if b == 0:
        lhs = 0.0 if nu > 0 else None
        if lhs is not None:
            return IdentityCheck(abs(lhs - rhs), 0.0, lhs, rhs)

    def f(r):
        if r == 0:
            return 0.0
        return r ** s * bessel_k(mu, a * r) * bessel_j(nu, b * r)

    width = math.pi / b if b > 0 else 1.0
    width = min(width, 2.0 / a)
    total = err = 0.0
    lo = 0.0
    n = 0
    while True:
        hi = lo + width
        val, e = integrate.quad(f, lo, hi, epsabs=1e-15, epsrel=1e-12, limit=100)
        total += val
        err += e
        n += 1
        # bound the rest by the monotone tail of r^s K_mu(ar) (|J| <= 1)
        if a * hi > s + 1:
            tail = hi ** s * bessel_k(mu, a * hi) / (a - s / hi) if a > s / hi else np.inf
            if tail < 1e-16 * max(abs(total), 1e-300):
                err += tail
                break
        if n > 10000:
            raise QuadratureError("identity 3 integral did not converge", total, err)
        lo = hi
    return IdentityCheck(abs(total - rhs), err, total, rhs)
