"""Model solutions of (-Delta)^{3/2} u = Q e^{3u} in R^3 and the fixed-point
construction of blow-up sequences u_k = v_k + k phi + c_k.

The bubble u(x) = log(2 lambda / (1 + lambda^2 |x - x0|^2)) solves the
equation with Q = 2 and has total curvature int 2 e^{3u} = 4 pi^2.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union

import numpy as np
from scipy import integrate

from . import _poly
from ._lattice import LatticeConvolver
from .errors import ApproximationWarning, DomainError
from .fields import Box3, DecayModel, GridField3
from .quad import QuadResult, integrate_radial

LAMBDA_1 = 4.0 * math.pi ** 2  # 2 |S^3|


# ---------------------------------------------------------------------------
# bubbles


@dataclass(frozen=True)
class BubbleSpec:
    """Center x0, scale lambda > 0 and quadratic coefficient c >= 0.

    Only c = 0 has a closed form; c > 0 adds the asymptotic -c|x - x0|^2 term
    and is flagged approximate.
    """

    center: tuple = (0.0, 0.0, 0.0)
    scale: float = 1.0
    quad_coefficient: float = 0.0

    def __post_init__(self):
        c = tuple(float(v) for v in np.broadcast_to(np.asarray(self.center, float), (3,)))
        object.__setattr__(self, "center", c)
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise DomainError(f"bubble scale must be positive, got {self.scale}")
        if not self.quad_coefficient >= 0:
            raise DomainError("quadratic coefficient must be >= 0")

    @property
    def exact(self) -> bool:
        return self.quad_coefficient == 0

    def scaled(self, k: float) -> "BubbleSpec":
        """Spec of u(kx) + log k (again a bubble: scale k lambda, center x0/k)."""
        if not k > 0:
            raise DomainError("k must be positive")
        return BubbleSpec(tuple(np.asarray(self.center) / k), self.scale * k, self.quad_coefficient * k * k)


def bubble_u(spec: BubbleSpec, x):
    """u(x) = log(2 lambda / (1 + lambda^2 |x - x0|^2)) [- c |x - x0|^2].

    Radially decreasing about x0 with u(x) + 2 log|x| -> log(2/lambda) as
    |x| -> infinity.  Accepts one point or an (M, 3) array.
    """
    x = np.asarray(x, float)
    r2 = np.sum((x - np.asarray(spec.center)) ** 2, axis=-1)
    lam = spec.scale
    u = np.log(2.0 * lam) - np.log1p(lam * lam * r2)
    if not spec.exact:
        warnings.warn("bubble with c > 0 is the asymptotic model -c|x|^2 added to the c = 0 profile",
                      ApproximationWarning, stacklevel=2)
        u = u - spec.quad_coefficient * r2
    return float(u) if np.ndim(u) == 0 else u


def bubble_field(spec: BubbleSpec, box: Box3) -> GridField3:
    """Bubble sampled on ``box`` with its log-growth far-field model."""
    vals = bubble_u(spec, box.points()).reshape(box.shape)
    model = DecayModel.log(2.0, math.log(2.0 / spec.scale), spec.center)
    return GridField3(box, vals, model, {"bubble_scale": spec.scale, "approximate": not spec.exact})


def scaled_family(spec: BubbleSpec, k: float, box: Optional[Box3] = None) -> GridField3:
    """u_k(x) = u(kx) + log k on ``box`` (default: half-width 8, 64^3)."""
    box = box or Box3.cube(8.0, 64)
    return bubble_field(spec.scaled(k), box)


def bubble_mass(spec: BubbleSpec, radius: Optional[float] = None, tol: float = 1e-12) -> QuadResult:
    """int_{B_radius(x0)} e^{3u} dx by radial quadrature (whole space when radius is None).

    Equals 2 pi^2 over R^3 for every lambda.
    """
    if not spec.exact:
        raise DomainError("bubble_mass needs the closed-form c = 0 bubble")
    lam = spec.scale

    def f(r):
        return (2.0 * lam / (1.0 + lam * lam * r * r)) ** 3

    if radius is None:
        # substitute t = lambda r so the peak width is O(1)
        res = integrate_radial(lambda t: (2.0 / (1.0 + t * t)) ** 3, 3, tol=tol)
        return res
    pts = [min(radius, 1.0 / lam)] if 1.0 / lam < radius else None
    v, e = integrate.quad(lambda r: 4 * math.pi * r * r * f(r), 0.0, radius, points=pts,
                          epsabs=0.0, epsrel=tol, limit=200)
    return QuadResult(v, e)


def total_curvature(spec: BubbleSpec) -> float:
    """int 2 e^{3u} dx; equals Lambda_1 = 4 pi^2."""
    return 2.0 * bubble_mass(spec).value


# ---------------------------------------------------------------------------
# polynomial biharmonic profiles


class ZeroSet(NamedTuple):
    """S_Phi = {x in Sigma_0 : phi(x) = 0}.

    kind: "empty", "subspace" (x_i = 0 for i in ``axes``) or "numeric"
    (no closed form; located on a grid).
    """

    kind: str
    axes: tuple
    dimension: int

    def distance(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, float))
        if self.kind == "empty":
            return np.full(len(x), np.inf)
        if self.kind == "subspace":
            return np.sqrt(np.sum(x[:, list(self.axes)] ** 2, axis=1))
        raise DomainError("distance needs a closed-form zero set")


@dataclass(frozen=True, eq=False)
class BiharmonicProfile:
    """Polynomial Phi(x1, x2, x3, y) of degree <= 4 in the class K(Sigma_0).

    ``coefficients`` maps exponent tuples (e1, e2, e3, e4) to reals.  The
    constructor checks, exactly on the coefficients, that Delta^2 Phi = 0,
    d_y Phi(x, 0) = 0 and d_y Delta Phi(x, 0) = 0; Phi <= 0 and Phi != 0 are
    checked on a sample grid of the closed half-space.
    """

    coefficients: dict
    domain: Box3 = field(default_factory=lambda: Box3.cube(1.0, 64, cell_centered=True))

    def __post_init__(self):
        c = {}
        for e, v in dict(self.coefficients).items():
            e = tuple(int(p) for p in e)
            if len(e) != 4 or min(e) < 0:
                raise DomainError(f"bad exponent {e}")
            if sum(e) > 4:
                raise DomainError("profiles are polynomials of degree <= 4")
            c[e] = c.get(e, 0.0) + float(v)
        c = _poly.clean(c)
        object.__setattr__(self, "coefficients", c)
        if not c:
            raise DomainError("Phi must not vanish identically")
        tol = 1e-12 * max(abs(v) for v in c.values())
        if any(abs(v) > tol for v in _poly.laplacian(_poly.laplacian(c)).values()):
            raise DomainError("Phi is not biharmonic")
        if any(e[3] == 1 for e in c):
            raise DomainError("d_y Phi(x, 0) must vanish")
        if any(e[3] == 1 for e in _poly.laplacian(c)):
            raise DomainError("d_y Delta Phi(x, 0) must vanish")
        X = self._sample()
        vals = _poly.evaluate(c, X)
        scale = max(float(np.max(np.abs(vals))), 1e-300)
        if np.max(vals) > 1e-12 * scale:
            raise DomainError("Phi must be nonpositive on the half-space")

    def _sample(self, m: int = 9) -> np.ndarray:
        lo = np.asarray(self.domain.center) - 2 * np.asarray(self.domain.half_widths)
        hi = np.asarray(self.domain.center) + 2 * np.asarray(self.domain.half_widths)
        axes = [np.linspace(a, b, m) for a, b in zip(lo, hi)]
        axes.append(np.linspace(0.0, 2 * max(self.domain.half_widths), m))
        return np.array(list(itertools.product(*axes)))

    def __call__(self, X):
        X = np.atleast_2d(np.asarray(X, float))
        return _poly.evaluate(self.coefficients, X)

    def trace(self, x) -> np.ndarray:
        """phi(x) = Phi(x, 0)."""
        x = np.atleast_2d(np.asarray(x, float))
        return _poly.evaluate(self.coefficients, np.column_stack([x, np.zeros(len(x))]))

    def trace_field(self, box: Optional[Box3] = None) -> GridField3:
        box = box or self.domain
        return GridField3(box, self.trace(box.points()).reshape(box.shape))

    def laplacian(self) -> dict:
        return _poly.laplacian(self.coefficients)

    def zero_set(self) -> ZeroSet:
        """Closed-form S_Phi for constant-plus-diagonal-quadratic traces."""
        tr = {e[:3]: v for e, v in self.coefficients.items() if e[3] == 0}
        quad_diag = all(sum(e) == 0 or (sum(e) == 2 and max(e) == 2) for e in tr)
        if quad_diag:
            const = tr.get((0, 0, 0), 0.0)
            if const < 0:
                return ZeroSet("empty", (), -1)
            axes = tuple(i for i in range(3) if tr.get(tuple(2 if j == i else 0 for j in range(3)), 0.0) != 0)
            return ZeroSet("subspace", axes, 3 - len(axes))
        return ZeroSet("numeric", (), -1)


def kernel_class_poly(a, domain: Optional[Box3] = None) -> BiharmonicProfile:
    """Phi = -a1 x1^2 - a2 x2^2 - a3 x3^2 with a_i >= 0 not all zero."""
    a = np.asarray(a, float)
    if a.shape != (3,) or np.any(a < 0) or not np.all(np.isfinite(a)):
        raise DomainError("need three nonnegative coefficients")
    if not np.any(a > 0):
        raise DomainError("all-zero coefficients give Phi = 0")
    coeffs = {tuple(2 if j == i else 0 for j in range(4)): -a[i] for i in range(3) if a[i] > 0}
    kw = {"domain": domain} if domain is not None else {}
    return BiharmonicProfile(coeffs, **kw)


# ---------------------------------------------------------------------------
# fixed-point construction


def _trace_values(phi) -> GridField3:
    if isinstance(phi, BiharmonicProfile):
        return phi.trace_field()
    if isinstance(phi, GridField3):
        return phi
    raise DomainError("phi must be a BiharmonicProfile or a GridField3 trace on Sigma_0")


def lambda_k(phi, k: float) -> float:
    """lambda_k = int_{Sigma_0} e^{6 k phi} dx by the cell-centered midpoint rule."""
    f = _trace_values(phi)
    return float(np.sum(np.exp(6.0 * k * f.values)) * f.box.cell_volume)


def c_k(epsilon: float, lam: float, s_phi_empty: bool = False) -> float:
    """c_k = log(epsilon / lambda_k) / 6, or 1 when S_Phi is empty."""
    if s_phi_empty:
        return 1.0
    if not (epsilon > 0 and lam > 0):
        raise DomainError("epsilon and lambda_k must be positive")
    return math.log(epsilon / lam) / 6.0


@dataclass
class FixedPointConfig:
    """Parameters of T_{epsilon,k}; ``Q`` and ``phi`` live on the Sigma_0 grid."""

    k: float
    epsilon: float
    Q: Union[GridField3, float]
    phi: Union[GridField3, BiharmonicProfile]
    max_iter: int = 500
    damping: float = 0.5
    tol: float = 1e-10
    s_phi_empty: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if not (0 < self.damping <= 1):
            raise DomainError("damping must lie in (0, 1]")
        if not self.epsilon > 0:
            raise DomainError("epsilon must be positive")
        if not self.k > 0:
            raise DomainError("k must be positive")
        if isinstance(self.phi, BiharmonicProfile):
            if self.phi.zero_set().kind == "empty":
                self.s_phi_empty = True
            self.phi = self.phi.trace_field()
        if not isinstance(self.Q, GridField3):
            self.Q = self.phi.with_values(np.full(self.phi.box.shape, float(self.Q)))
        if self.Q.box != self.phi.box:
            raise DomainError("Q and phi must share the Sigma_0 grid")

    @property
    def box(self) -> Box3:
        return self.phi.box

    @property
    def lambda_k(self) -> float:
        return lambda_k(self.phi, self.k)

    @property
    def c_k(self) -> float:
        return c_k(self.epsilon, self.lambda_k, self.s_phi_empty)


def T_map(v: GridField3, cfg: FixedPointConfig) -> GridField3:
    """v -> (1/2 pi^2) int_{Sigma_0} log(1/|x - z|) Q e^{3(k phi + c_k)} e^{3 v} dz on the grid.

    The density is constant on each cell of Sigma_0 (midpoint rule) with the
    exact cell average of the kernel in the singular cell; the sum is done by
    FFT.
    """
    if v.box != cfg.box:
        raise DomainError("v must live on the Sigma_0 grid")
    h = float(cfg.box.spacing[0])
    w = cfg.Q.values * np.exp(3.0 * (cfg.k * cfg.phi.values + cfg.c_k) + 3.0 * v.values)
    vals = LatticeConvolver(w, h, "log", correct=False).level(0.0)
    return GridField3(cfg.box, vals, DecayModel.compact(), {"map": "T"})


def _const(cfg, c):
    return GridField3(cfg.box, np.full(cfg.box.shape, float(c)))


def sup_bound_holds(cfg: FixedPointConfig) -> bool:
    """Probe sup|T(v)| <= 1 for the constant fields v = -1, 0, 1."""
    return all(float(np.max(np.abs(T_map(_const(cfg, c), cfg).values))) <= 1.0 for c in (-1.0, 0.0, 1.0))


def admissible_epsilon(cfg: FixedPointConfig, max_halvings: int = 80) -> float:
    """Largest epsilon = cfg.epsilon / 2^j passing :func:`sup_bound_holds`."""
    eps = cfg.epsilon
    for _ in range(max_halvings + 1):
        trial = FixedPointConfig(cfg.k, eps, cfg.Q, cfg.phi, cfg.max_iter, cfg.damping, cfg.tol,
                                 cfg.s_phi_empty)
        if sup_bound_holds(trial):
            return eps
        eps *= 0.5
    raise DomainError("no admissible epsilon found")


def contraction_estimate(cfg: FixedPointConfig, pairs: int = 4, seed: int = 0) -> float:
    """Measured max sup|T(v1) - T(v2)| / sup|v1 - v2| over random smooth pairs with sup <= 1."""
    rng = np.random.default_rng(seed)
    x1, x2, x3 = cfg.box.mesh()
    L = 0.0
    for _ in range(pairs):
        fields = []
        for _ in range(2):
            a = rng.uniform(-1, 1, 4)
            f = a[0] + a[1] * np.sin(np.pi * x1 * a[2]) * np.cos(np.pi * (x2 + x3) * a[3])
            fields.append(_const(cfg, 0.0).with_values(f / max(1.0, np.max(np.abs(f)))))
        d = float(np.max(np.abs(fields[0].values - fields[1].values)))
        if d == 0:
            continue
        t = float(np.max(np.abs(T_map(fields[0], cfg).values - T_map(fields[1], cfg).values)))
        L = max(L, t / d)
    return L


@dataclass
class SolveResult:
    """Fixed point v_k of T with u_k = v_k + k phi + c_k on Sigma_0."""

    v_k: GridField3
    c_k: float
    lambda_k: float
    residual: float
    iterations: int
    converged: bool
    epsilon: float
    k: float
    history: list = field(default_factory=list)
    u_k: Optional[GridField3] = None

    def to_json(self) -> dict:
        return {"k": self.k, "c_k": self.c_k, "lambda_k": self.lambda_k, "epsilon": self.epsilon,
                "residual": self.residual, "iterations": self.iterations, "converged": self.converged,
                "sup_v": float(np.max(np.abs(self.v_k.values))), "history": list(self.history)}


def solve_fixed_point(cfg: FixedPointConfig, auto_epsilon: bool = True) -> SolveResult:
    """Damped Picard iteration v <- (1 - d) v + d T(v) from v = 0.

    With ``auto_epsilon`` epsilon is first halved until the sup bound holds.
    Stops when sup|T(v) - v| <= tol; ``converged`` also requires sup|v| <= 1.
    """
    if auto_epsilon:
        eps = admissible_epsilon(cfg)
        if eps != cfg.epsilon:
            cfg = FixedPointConfig(cfg.k, eps, cfg.Q, cfg.phi, cfg.max_iter, cfg.damping, cfg.tol,
                                   cfg.s_phi_empty)
    v = _const(cfg, 0.0)
    history = []
    res = math.inf
    it = 0
    for it in range(1, cfg.max_iter + 1):
        Tv = T_map(v, cfg)
        res = float(np.max(np.abs(Tv.values - v.values)))
        history.append(res)
        if res <= cfg.tol:
            break
        v = v.with_values((1.0 - cfg.damping) * v.values + cfg.damping * Tv.values)
    ck = cfg.c_k
    converged = res <= cfg.tol and float(np.max(np.abs(v.values))) <= 1.0
    u = v.with_values(v.values + cfg.k * cfg.phi.values + ck)
    return SolveResult(v, ck, cfg.lambda_k, res, it, converged, cfg.epsilon, cfg.k, history, u)


class BlowupStep(NamedTuple):
    k: float
    u_k: GridField3
    result: SolveResult
    sup_away: float          # sup |u_k / k - phi| at distance >= ``away`` from S_Phi
    max_near_zero_set: float  # max u_k on the nodes closest to S_Phi (nan when empty)


def blowup_sequence(profile: BiharmonicProfile, k_list, Q=1.0, epsilon: float = 1.0,
                    away: float = 0.5, damping: float = 0.5, tol: float = 1e-10,
                    max_iter: int = 500) -> list:
    """Solve for every k with one epsilon shared by all k.

    The shared epsilon is the largest epsilon / 2^j that passes the sup bound
    for every k.  Returns a list of :class:`BlowupStep`.
    """
    phi = profile.trace_field()
    zs = profile.zero_set()
    empty = zs.kind == "empty"
    eps = epsilon
    for k in k_list:
        eps = admissible_epsilon(FixedPointConfig(k, eps, Q, phi, max_iter, damping, tol, empty))
    pts = phi.box.points()
    if zs.kind == "numeric":
        near = np.abs(phi.values.ravel()) <= 1e-12
        far = phi.values.ravel() <= -away ** 2
    else:
        dist = zs.distance(pts)
        far = dist >= away
        near = dist <= dist.min() + 1e-12 if not empty else np.zeros(len(pts), bool)
    out = []
    for k in k_list:
        cfg = FixedPointConfig(k, eps, Q, phi, max_iter, damping, tol, empty)
        r = solve_fixed_point(cfg, auto_epsilon=False)
        u = r.u_k.values.ravel()
        dev = np.abs(u / k - phi.values.ravel())
        sup_away = float(np.max(dev[far])) if np.any(far) else math.nan
        top = float(np.max(u[near])) if np.any(near) else math.nan
        out.append(BlowupStep(k, r.u_k, r, sup_away, top))
    return out
