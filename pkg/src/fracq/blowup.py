"""Concentration diagnostics: local curvature mass and S_1 detection, the
V/H decomposition of a solution, beta_k, Pizzetti mean-value checks and the
Brezis-Merle integrability probe.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy import integrate, ndimage

from ._lattice import LatticeConvolver
from .errors import DomainError, QuadratureError
from .extension import DirichletExtension, NeumannPotential
from .fields import Box3, DecayModel, GridField3
from .liouville import LAMBDA_1
from .quad import QuadResult, ball4_volume, integrate_ball4

THRESHOLD = LAMBDA_1 / 2.0  # 2 pi^2


# ---------------------------------------------------------------------------
# sampling grid fields at arbitrary points


class FieldSampler:
    """Cubic-spline interpolation of a GridField3 inside its box, decay model outside."""

    def __init__(self, f: GridField3):
        self.field = f
        self.box = f.box
        self.coeffs = ndimage.spline_filter(np.asarray(f.values, float), order=3, mode="nearest")
        self.first = np.array([ax[0] for ax in f.box.axes()])
        self.h = f.box.spacing

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, float))
        inside = self.box.contains(x)
        out = np.empty(len(x))
        if np.any(inside):
            t = (x[inside] - self.first) / self.h
            coords = t[:, ::-1].T  # array axes are (x3, x2, x1)
            out[inside] = ndimage.map_coordinates(self.coeffs, coords, order=3, mode="nearest",
                                                  prefilter=False)
        if np.any(~inside):
            out[~inside] = self.field.decay_model(x[~inside])
        return out


def _sampler(f) -> Callable:
    if isinstance(f, GridField3):
        return FieldSampler(f)
    if callable(f):
        return lambda x: np.asarray(f(np.atleast_2d(np.asarray(x, float))), float)
    c = float(f)
    return lambda x: np.full(len(np.atleast_2d(x)), c)


def _sphere_rule(nt: int = 32, nphi: int = 64):
    t, wt = np.polynomial.legendre.leggauss(nt)
    phi = 2 * np.pi * np.arange(nphi) / nphi
    st = np.sqrt(1 - t * t)
    dirs = np.stack([np.outer(st, np.cos(phi)).ravel(), np.outer(st, np.sin(phi)).ravel(),
                     np.repeat(t, nphi)], axis=1)
    w = np.repeat(wt, nphi) * (2 * np.pi / nphi)  # sums to 4 pi
    return dirs, w


_DIRS, _DW = _sphere_rule()


def _breaks(center, radius, scale_hint, box: Optional[Box3]):
    pts = [0.5 * scale_hint, scale_hint, 2 * scale_hint, 4 * scale_hint]
    if box is not None:
        c = np.asarray(center, float)
        lo = np.asarray(box.center) - np.asarray(box.half_widths)
        hi = np.asarray(box.center) + np.asarray(box.half_widths)
        near = np.minimum(np.abs(c - lo), np.abs(hi - c))
        far = np.maximum(np.abs(c - lo), np.abs(hi - c))
        pts += [float(near.min()), float(np.linalg.norm(far))]
    return sorted(p for p in set(pts) if 0 < p < radius)


def _ball3_integral(g: Callable, center, radius: float, tol: float, scale_hint: float,
                    box: Optional[Box3] = None) -> QuadResult:
    center = np.asarray(center, float)

    def shell(r):
        if r == 0:
            return 0.0
        return r * r * float(np.dot(_DW, g(center + r * _DIRS)))

    pts = _breaks(center, radius, scale_hint, box)
    kw = dict(epsabs=0.0, epsrel=tol, limit=400)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if math.isinf(radius):
            edge = pts[-1] if pts else 1.0
            a = integrate.quad(shell, 0.0, edge, points=pts[:-1] or None, **kw)
            b = integrate.quad(shell, edge, math.inf, **kw)
            return QuadResult(a[0] + b[0], a[1] + b[1])
        v, e = integrate.quad(shell, 0.0, radius, points=pts or None, **kw)
    return QuadResult(v, e)


def local_mass(Q, u, center, radius: float, tol: float = 1e-8) -> float:
    """int_{B_radius(center)} |Q| e^{3u} dx.

    ``Q`` and ``u`` may be GridField3 (spline interpolation, decay model
    outside the box), callables on (M, 3) points, or constants.  The radial
    integral is adaptive (QUADPACK) with breakpoints near the center; angles
    use a fixed Gauss-Legendre x trapezoid rule.  ``radius=inf`` integrates
    over R^3.
    """
    if not radius > 0:
        raise DomainError("radius must be positive")
    qs, us = _sampler(Q), _sampler(u)

    def g(x):
        return np.abs(qs(x)) * np.exp(3.0 * us(x))

    box = u.box if isinstance(u, GridField3) else None
    hint = 4 * float(np.min(box.spacing)) if box is not None else 1.0
    return max(_ball3_integral(g, center, radius, tol, hint, box).value, 0.0)


# ---------------------------------------------------------------------------
# S_1 detection


@dataclass
class ConcentrationReport:
    """Masses int_{B_r(c)} |Q| e^{3u} per candidate and radius.

    ``masses`` is the finite-k surrogate of the liminf: the minimum over the
    supplied family; ``per_member`` keeps the raw values (member x candidate x
    radius).  A candidate is "above" when its smallest mass over the radii
    is >= threshold (1 - band), "marginal" when it lies within one more band
    below that, and "below" otherwise.
    """

    candidates: list
    radii: list
    masses: np.ndarray
    per_member: np.ndarray
    threshold: float
    band: float
    verdicts: list
    ratios: list = field(default_factory=list)
    beta_values: list = field(default_factory=list)

    @property
    def S1(self) -> list:
        return [c for c, v in zip(self.candidates, self.verdicts) if v == "above"]

    def to_json(self) -> dict:
        return {"candidates": [list(map(float, c)) for c in self.candidates],
                "radii": [float(r) for r in self.radii],
                "masses": self.masses.tolist(), "per_member": self.per_member.tolist(),
                "threshold": self.threshold, "marginal_band": self.band, "verdicts": list(self.verdicts),
                "S1": [list(map(float, c)) for c in self.S1], "ratios": list(self.ratios),
                "beta_values": list(self.beta_values)}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x1", "x2", "x3"] + [f"r={r:g}" for r in self.radii] + ["verdict"])
        for c, row, v in zip(self.candidates, self.masses, self.verdicts):
            w.writerow([repr(float(t)) for t in c] + [repr(float(m)) for m in row] + [v])
        return buf.getvalue()


def detect_S1(Q, family: Sequence, candidates, radii, marginal_band: float = 0.05,
              beta_values: Optional[list] = None) -> ConcentrationReport:
    """Classify candidate concentration points against Lambda_1 / 2 = 2 pi^2.

    ``Q`` is one weight for all members or a list matching ``family`` (the
    tail u_k of a sequence).  The liminf over k is replaced by the minimum over
    the family and the limit in the radius by the minimum over ``radii``.
    ``ratios`` holds, per candidate, the last member's mass over the previous
    one at the smallest radius (1 when the family has one member).
    """
    family = list(family)
    if not family:
        raise DomainError("detect_S1 needs a non-empty family")
    radii = sorted(float(r) for r in radii)
    if not radii or radii[0] <= 0:
        raise DomainError("radii must be positive")
    cands = [np.asarray(c, float) for c in np.atleast_2d(np.asarray(candidates, float))]
    Qs = list(Q) if isinstance(Q, (list, tuple)) else [Q] * len(family)
    if len(Qs) != len(family):
        raise DomainError("Q list must match the family")
    raw = np.zeros((len(family), len(cands), len(radii)))
    for m, (q, u) in enumerate(zip(Qs, family)):
        qs, us = _sampler(q), _sampler(u)
        g = lambda x, qs=qs, us=us: np.abs(qs(x)) * np.exp(3.0 * us(x))
        box = u.box if isinstance(u, GridField3) else None
        hint = 4 * float(np.min(box.spacing)) if box is not None else 1.0
        for i, c in enumerate(cands):
            for j, r in enumerate(radii):
                raw[m, i, j] = max(_ball3_integral(g, c, r, 1e-8, hint, box).value, 0.0)
    masses = raw.min(axis=0)
    verdicts = []
    for row in masses:
        m = row.min()
        if m >= THRESHOLD * (1 - marginal_band):
            verdicts.append("above")
        elif m >= THRESHOLD * (1 - 2 * marginal_band):
            verdicts.append("marginal")
        else:
            verdicts.append("below")
    if len(family) > 1:
        ratios = [float(raw[-1, i, 0] / raw[-2, i, 0]) if raw[-2, i, 0] > 0 else math.inf
                  for i in range(len(cands))]
    else:
        ratios = [1.0] * len(cands)
    return ConcentrationReport([tuple(c) for c in cands], radii, masses, raw, THRESHOLD,
                               marginal_band, verdicts, ratios, list(beta_values or []))


# ---------------------------------------------------------------------------
# V / H decomposition


class Decomposition(NamedTuple):
    V: NeumannPotential      # log potential of Q e^{3u} on R^4_+
    v: GridField3            # its trace on the grid
    h: GridField3            # u - v
    H: DirichletExtension    # Poisson extension of h


def decompose(u_k: GridField3, Q_k) -> Decomposition:
    """Split u_k = v_k + h_k with v_k the log potential of Q_k e^{3 u_k}.

    The density is taken on the grid of u_k (zero outside the box).  h_k
    inherits u_k's log-growth model with amplitude reduced by
    mass / (2 pi^2), the growth rate of v_k.
    """
    q = Q_k.values if isinstance(Q_k, GridField3) else np.full(u_k.box.shape, float(Q_k))
    w = u_k.with_values(q * np.exp(3.0 * u_k.values), DecayModel.compact())
    V = NeumannPotential(w)
    v_vals = V.level(0.0)
    mass = w.integral()
    um = u_k.decay_model
    if um.kind == "log_growth":
        model = DecayModel.log(um.amplitude - mass / (2 * math.pi ** 2), um.offset, um.center)
    elif um.kind == "compact_support" and mass != 0:
        model = DecayModel.log(-mass / (2 * math.pi ** 2), 0.0, u_k.box.center)
    else:
        model = um
    v = u_k.with_values(v_vals, DecayModel.log(mass / (2 * math.pi ** 2), 0.0, u_k.box.center))
    h = u_k.with_values(u_k.values - v_vals, model)
    return Decomposition(V, v, h, DirichletExtension(h))


# ---------------------------------------------------------------------------
# beta_k


def _level_ball4(H, center, R: float, ny: int = 24) -> float:
    """int over the 4-ball of |H(x, |y|)| for grid-based evaluables.

    Gauss-Legendre in y; at each height the 3-ball in x is integrated from
    the spline-interpolated lattice level plus the far part.
    """
    center = np.asarray(center, float)
    t, wt = np.polynomial.legendre.leggauss(ny)
    box = H.box
    total = 0.0
    for tj, wj in zip(t, wt):
        y = center[3] + R * tj
        rho = R * math.sqrt(max(1.0 - tj * tj, 0.0))
        if rho == 0:
            continue
        ay = abs(y)
        grid = H.u.values if ay == 0 else H.level(ay)
        sampler = FieldSampler(GridField3(box, grid))
        far = getattr(H, "far", None)

        def g(x, sampler=sampler, ay=ay, far=far):
            val = sampler(x)
            if far is not None and ay > 0:
                val = val + far(x, ay)
            return np.abs(val)

        total += wj * R * _ball3_integral(g, center[:3], rho, 1e-7, 4 * float(box.spacing[0])).value
    return total


def beta_k(H, center, R0: float) -> float:
    """beta = int_{B_R0(X0)} |H| dX over the 4-ball, H read as H(x, |y|).

    Grid-based extensions are integrated level by level; any other callable
    ``H(X)`` on (M, 4) points goes to the adaptive 4-ball rule.
    """
    if not R0 > 0:
        raise DomainError("R0 must be positive")
    center = np.asarray(center, float)
    if center.shape == (3,):
        center = np.append(center, 0.0)
    if hasattr(H, "level") and hasattr(H, "box"):
        return _level_ball4(H, center, R0)

    def f(X):
        X = np.array(X, float)
        X[:, 3] = np.abs(X[:, 3])
        return np.abs(np.asarray(H(X), float))

    # centered on the boundary, |H(x, |y|)| is even in y with a kink at y = 0:
    # integrate the upper half-ball, whose face is that plane, and double it
    on_plane = center[3] == 0
    try:
        res = integrate_ball4(f, center, R0, tol=1e-8, upper=on_plane).value
    except QuadratureError as exc:
        res = float(exc.value)
    return 2.0 * res if on_plane else res


# ---------------------------------------------------------------------------
# Pizzetti


class PizzettiCheck(NamedTuple):
    center: tuple
    radius: float
    mean_value: float
    predicted: float
    residual: float
    error: float          # quadrature plus Laplacian error estimate


def _fd_laplacian4(h: Callable, c: np.ndarray, step: float):
    # fourth-order central differences: exact on polynomials of degree <= 5
    pts = [c]
    for ax in range(4):
        for k in (-2, -1, 1, 2):
            p = c.copy()
            p[ax] += k * step
            pts.append(p)
    v = np.asarray(h(np.array(pts)), float)
    lap = 0.0
    for ax in range(4):
        m2, m1, p1, p2 = v[1 + 4 * ax: 5 + 4 * ax]
        lap += (-m2 + 16 * m1 - 30 * v[0] + 16 * p1 - p2) / (12 * step * step)
    err = 64 * np.finfo(float).eps * float(np.max(np.abs(v))) / step ** 2
    return lap, err


def pizzetti_check(h: Callable, center, r: float, laplacian: Optional[Callable] = None,
                   tol: float = 1e-12) -> PizzettiCheck:
    """Ball mean of a biharmonic h on R^4 against h(c) + (r^2/12) Delta h(c).

    ``h`` maps (M, 4) points to values.  Delta h(c) comes from ``laplacian``
    when given, otherwise from fourth-order central differences.
    """
    c = np.asarray(center, float)
    if c.shape != (4,):
        raise DomainError("center must be a point of R^4")
    if not r > 0:
        raise DomainError("radius must be positive")
    q = integrate_ball4(lambda X: np.asarray(h(X), float), c, r, tol=tol, n_start=8, n_max=64)
    vol = ball4_volume(r)
    mean = q.value / vol
    hc = float(np.asarray(h(c[None, :]), float)[0])
    if laplacian is not None:
        lap = float(np.asarray(laplacian(c[None, :]), float)[0])
        lap_err = 0.0
    else:
        lap, lap_err = _fd_laplacian4(h, c, max(r, 1.0) * 0.1)
    pred = hc + r * r / 12.0 * lap
    err = q.error / vol + r * r / 12.0 * lap_err + 8 * np.finfo(float).eps * max(abs(mean), abs(pred), 1.0)
    return PizzettiCheck(tuple(c), float(r), mean, pred, mean - pred, err)


# ---------------------------------------------------------------------------
# Brezis-Merle probe


def mollified_point_mass(box: Box3, alpha: float, center=None, width_cells: float = 8.0) -> GridField3:
    """Smooth bump exp(-1/(1 - (r/R)^2)), R = width_cells * h / 2, scaled to node-sum mass alpha."""
    c = np.asarray(box.center if center is None else center, float)
    h = float(np.min(box.spacing))
    R = 0.5 * width_cells * h
    r = np.linalg.norm(box.points() - c, axis=1) / R
    bump = np.zeros_like(r)
    inside = r < 1
    bump[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    s = bump.sum() * box.cell_volume
    if s == 0:
        raise DomainError("mollifier support contains no grid node")
    return GridField3(box, (alpha / s * bump).reshape(box.shape))


class BrezisMerleResult(NamedTuple):
    value: float       # int_K e^{3pV} at the finer resolution
    coarse: float      # same at the coarser resolution
    trend: float       # value / coarse
    divergent: bool
    alpha: float


def _exp_integral(w: GridField3, p: float, K: Box3) -> float:
    V = LatticeConvolver(w.values, float(w.box.spacing[0]), "log", correct=False).level(0.0)
    mask = K.contains(w.box.points()).reshape(w.box.shape)
    return float(np.sum(np.exp(3.0 * p * V[mask])) * w.box.cell_volume)


def _restrict(w: GridField3) -> GridField3:
    b = w.box
    if not b.cell_centered or any(n % 2 for n in b.resolution):
        raise DomainError("restriction needs a cell-centered grid with even resolution")
    n3, n2, n1 = b.shape
    coarse = w.values.reshape(n3 // 2, 2, n2 // 2, 2, n1 // 2, 2).mean(axis=(1, 3, 5))
    cb = Box3(b.center, b.half_widths, tuple(n // 2 for n in b.resolution), True)
    return GridField3(cb, coarse)


def brezis_merle_probe(w: Union[GridField3, Callable], p: float, K: Optional[Box3] = None,
                       n: int = 96, trend_threshold: float = 1.15) -> BrezisMerleResult:
    """int_K e^{3pV(x, 0)} dx with V the log potential of w, and its refinement trend.

    ``w`` is either a factory ``Box3 -> GridField3`` (called on K at
    resolutions n and 2n, so a mollifier of fixed width in cells shrinks
    under refinement) or a cell-centered GridField3 whose 2x restriction
    serves as the coarse level.  The trend is fine / coarse; values above
    ``trend_threshold`` are classified divergent.
    """
    if callable(w) and not isinstance(w, GridField3):
        K = K or Box3.cube(1.0, n, cell_centered=True)
        fine_box = Box3(K.center, K.half_widths, (2 * n,) * 3, True)
        coarse_box = Box3(K.center, K.half_widths, (n,) * 3, True)
        wf, wc = w(fine_box), w(coarse_box)
    else:
        wf = w
        wc = _restrict(w)
        K = K or w.box
    alpha = float(np.sum(np.abs(wf.values)) * wf.box.cell_volume)
    fine = _exp_integral(wf, p, K)
    coarse = _exp_integral(wc, p, K)
    trend = fine / coarse
    return BrezisMerleResult(fine, coarse, trend, bool(trend > trend_threshold), alpha)
