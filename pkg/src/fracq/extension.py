"""Half-space extensions of functions on R^3 and the boundary operator L_{3/2}.

* ``DirichletExtension``: U = P * u with the Poisson kernel of R^4_+;
  U is biharmonic, even in y, and U(x, 0) = u(x).
* ``NeumannPotential``: V = (1/2 pi^2) log(1/|X|) * w for a density on a box.
* ``neumann_trace_L32``: L U(x) = 1/2 lim_{y->0} d_y Delta U(x, y) by finite
  differences in y with Richardson extrapolation.
* ``spectral_fraclap``: (-Delta)^s u by FFT, the operator with symbol |xi|^{2s}.

Fields that do not decay (log growth, power tails) are split with a smooth
radial window w: the windowed part w*u lives on the grid, the far part
(1-w)*m uses the radial decay model m and is integrated in one dimension
after doing the angular integral in closed form.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import fft, integrate
from scipy.interpolate import CubicSpline

from ._lattice import KAPPA3, LatticeConvolver
from ._util import workers
from .errors import DomainError
from .fields import Box3, DecayModel, GridField3
from .quad import TailWeight, log_potential, weighted_tail_norm
from .specfun import gamma_fn

PROVENANCE = ("dirichlet_extension", "neumann_potential", "sum", "analytic")


@dataclass(frozen=True, eq=False)
class HalfSpaceField:
    """Samples of a function on R^4_+ at points (x1, x2, x3, y), y >= 0."""

    points: np.ndarray
    values: np.ndarray
    provenance: str = "analytic"

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.points, float))
        v = np.atleast_1d(np.asarray(self.values, float))
        if p.shape[-1] != 4 or len(p) != len(v):
            raise DomainError("HalfSpaceField needs (M, 4) points and M values")
        if np.any(p[:, 3] < 0):
            raise DomainError("HalfSpaceField samples need y >= 0")
        if self.provenance not in PROVENANCE:
            raise DomainError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "values", v)

    def __add__(self, other: "HalfSpaceField") -> "HalfSpaceField":
        if not np.array_equal(self.points, other.points):
            raise DomainError("fields are sampled at different points")
        return HalfSpaceField(self.points, self.values + other.values, "sum")


# ---------------------------------------------------------------------------
# window and far-field pieces


def smoothstep(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, float)
    out = np.where(t >= 1, 1.0, 0.0)
    mid = (t > 0) & (t < 1)
    tm = t[mid]
    out[mid] = 0.5 * (1.0 + np.tanh(np.tan(np.pi * (tm - 0.5))))
    return out


@dataclass(frozen=True)
class Window:
    """Radial window equal to 1 inside r1 and 0 beyond r2 (about ``center``)."""

    r1: float
    r2: float
    center: tuple = (0.0, 0.0, 0.0)

    def radial(self, r):
        return 1.0 - smoothstep((np.asarray(r, float) - self.r1) / (self.r2 - self.r1))

    def __call__(self, x):
        return self.radial(np.linalg.norm(np.asarray(x, float) - np.asarray(self.center), axis=-1))


def default_window(u: GridField3, inner: float = 0.55, outer: float = 0.9) -> Window:
    c = np.asarray(u.decay_model.center)
    reach = min(u.box.half_widths) - float(np.max(np.abs(c - np.asarray(u.box.center))))
    if reach <= 0:
        raise DomainError("decay-model center lies outside the box")
    return Window(inner * reach, outer * reach, tuple(c))


def _sphere_power_mean(a, r, extra, q):
    """int_{S^2} (a^2 + r^2 + extra - 2 a r t)^{-q} d omega, a, r >= 0."""
    B = a * a + r * r + extra
    x = 2.0 * a * r / B
    out = np.empty(np.broadcast(a, r, x).shape)
    x = np.broadcast_to(x, out.shape)
    B = np.broadcast_to(B, out.shape)
    small = x < 1e-3
    xs = x[small]
    # ((1-x)^{1-q} - (1+x)^{1-q}) / (x (q-1)) = 2 [1 + q(q+1) x^2/6 + ...]
    out[small] = 4 * math.pi * B[small] ** (-q) * (1 + q * (q + 1) * xs ** 2 / 6
                                                   + q * (q + 1) * (q + 2) * (q + 3) * xs ** 4 / 120)
    xb = x[~small]
    if abs(q - 1.0) < 1e-14:
        ratio = np.log((1 + xb) / (1 - xb)) / xb
    else:
        ratio = ((1 - xb) ** (1 - q) - (1 + xb) ** (1 - q)) / (xb * (q - 1))
    out[~small] = 2 * math.pi * B[~small] ** (-q) * ratio
    return out


def _radial_quad(f, lo, hi, pts=None):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        v, e = integrate.quad(f, lo, hi, epsabs=1e-14, epsrel=1e-12, limit=500, points=pts)
    return v


def far_poisson(a, y, window: Window, model: DecayModel):
    """Poisson extension of (1 - w) m at radial distance a, height y > 0."""
    a = np.atleast_1d(np.asarray(a, float))
    out = np.empty_like(a)
    r1, r2 = window.r1, window.r2

    for i, ai in enumerate(a):
        def f(r):
            return ((1.0 - window.radial(r)) * model.radial(r) * r * r * KAPPA3 * y ** 3
                    * _sphere_power_mean(ai, r, y * y, 3.0))

        if ai < r1:
            out[i] = _radial_quad(f, r1, r2) + _radial_quad(f, r2, np.inf)
        elif ai < r2:
            out[i] = _radial_quad(f, r1, r2, [ai]) + _radial_quad(f, r2, np.inf)
        else:
            out[i] = _radial_quad(f, r1, r2) + _radial_quad(f, r2, ai) + _radial_quad(f, ai, np.inf)
    return out


def fraclap_constant(n: int, s: float) -> float:
    """c with (-Delta)^s f(x) = c int f(z) |x-z|^{-n-2s} dz for x off the support of f."""
    if float(s).is_integer():
        return 0.0
    return 2.0 ** (2 * s) * gamma_fn(n / 2.0 + s) / (math.pi ** (n / 2.0) * gamma_fn(-s))


def far_fraclap(a, s: float, window: Window, model: DecayModel):
    """(-Delta)^s of (1 - w) m at radial distance a < r1."""
    a = np.atleast_1d(np.asarray(a, float))
    c = fraclap_constant(3, s)
    q = (3.0 + 2.0 * s) / 2.0
    out = np.empty_like(a)
    for i, ai in enumerate(a):
        def f(r):
            return (1.0 - window.radial(r)) * model.radial(r) * r * r * _sphere_power_mean(ai, r, 0.0, q)

        out[i] = c * (_radial_quad(f, window.r1, window.r2) + _radial_quad(f, window.r2, np.inf))
    return out


class _RadialTable:
    """Cubic-spline table of a smooth radial function on [0, amax]."""

    def __init__(self, fn, amax, da=0.02):
        n = max(int(math.ceil(amax / da)), 8)
        self.amax = amax
        grid = np.linspace(0.0, amax, n + 1)
        vals = fn(grid)
        # even in a: mirror for a clean spline at the origin
        self.spline = CubicSpline(np.concatenate([-grid[:0:-1], grid]),
                                  np.concatenate([vals[:0:-1], vals]))

    def __call__(self, a):
        a = np.asarray(a, float)
        if np.any(a > self.amax * (1 + 1e-12)):
            raise DomainError("radial table evaluated beyond its range")
        return self.spline(a)


# ---------------------------------------------------------------------------
# evaluable extensions


def _require_isotropic(box: Box3) -> float:
    h = box.spacing
    if not np.allclose(h, h[0], rtol=1e-12):
        raise DomainError("extensions need equal grid spacing along all axes")
    return float(h[0])


def _node_indices(box: Box3, x):
    """Integer node indices (i3, i2, i1) for points x (M, 3); None if any is off-grid."""
    x = np.atleast_2d(np.asarray(x, float))
    ax0 = np.array([a[0] for a in box.axes()])
    t = (x - ax0) / box.spacing
    i = np.rint(t)
    if np.any(np.abs(t - i) > 1e-7) or np.any(i < 0) or np.any(i >= np.asarray(box.resolution)):
        return None
    i = i.astype(int)
    return i[:, 2], i[:, 1], i[:, 0]


class DirichletExtension:
    """Poisson extension U of a grid field u to R^4_+.

    Call as ``U(x, y)`` with x an (M, 3) array of grid nodes (any point when
    y is large enough for a plain node sum) and a scalar y >= 0.
    """

    provenance = "dirichlet_extension"

    def __init__(self, u: GridField3, window: Optional[Window] = None, check_tail: bool = True):
        self.u = u
        self.box = u.box
        self.spacing = _require_isotropic(u.box)
        model = u.decay_model
        if check_tail:
            weighted_tail_norm(u, TailWeight(6.0))  # raises on a non-integrable tail
        self.model = model
        if model.kind == "compact_support":
            self.window = None
            data = u.values
        else:
            self.window = window or default_window(u)
            data = u.values * self.window(u.box.points()).reshape(u.box.shape)
        self.data = data
        self.lattice = LatticeConvolver(data, self.spacing, "poisson")
        self._far = {}
        self.direct_far = 64

    def far(self, x, y):
        if self.window is None or y == 0:
            return np.zeros(len(x))
        a = np.linalg.norm(np.asarray(x, float) - np.asarray(self.window.center), axis=1)
        uniq, inv = np.unique(np.round(a, 13), return_inverse=True)
        if len(uniq) <= self.direct_far:
            # few radii (finite-difference stencils): exact quadrature, no spline noise
            return far_poisson(uniq, y, self.window, self.model)[inv]
        need = float(a.max()) if len(a) else 0.0
        tab = self._far.get(y)
        if tab is None or need > tab.amax:
            amax = max(need * 1.2, 0.5 * self.window.r1)
            tab = _RadialTable(lambda t: far_poisson(t, y, self.window, self.model), amax, 0.05)
            self._far[y] = tab
        return tab(a)

    def level(self, y: float) -> np.ndarray:
        """Grid part of U at height y on every node (far part excluded)."""
        return self.lattice.level(y)

    def __call__(self, x, y):
        x = np.atleast_2d(np.asarray(x, float))
        y = abs(float(y))
        if y == 0:
            idx = _node_indices(self.box, x)
            if idx is None:
                raise DomainError("boundary values are only available at grid nodes")
            return self.u.values[idx].copy()
        idx = _node_indices(self.box, x)
        if idx is not None:
            grid = self.level(y)[idx]
        else:
            if y < 2 * self.spacing:
                raise DomainError("off-grid evaluation needs y >= 2 grid spacings")
            nodes = self.box.points()
            d = self.data.ravel()
            grid = np.array([np.dot(KAPPA3 * y ** 3 / (y * y + np.sum((nodes - p) ** 2, axis=1)) ** 3, d)
                             for p in x]) * self.box.cell_volume
        return grid + self.far(x, y)

    def valid_radius(self) -> float:
        if self.window is None:
            return float(min(self.box.half_widths))
        return self.window.r1


class NeumannPotential:
    """V(X) = (1/2 pi^2) int_box log(1/|X - (z, 0)|) w(z) dz.

    ``correct=True`` uses the corrected lattice rule (smooth densities
    vanishing near the box edges); ``correct=False`` keeps the plain node
    rule with an exact singular-cell average, which suits densities with
    jumps at the box boundary.
    """

    provenance = "neumann_potential"

    def __init__(self, w: GridField3, correct: bool = True, derivatives: str = "spectral"):
        self.w = w
        self.box = w.box
        self.spacing = _require_isotropic(w.box)
        self.lattice = LatticeConvolver(w.values, self.spacing, "log", correct=correct,
                                        derivatives=derivatives)

    def level(self, y: float) -> np.ndarray:
        return self.lattice.level(y)

    def __call__(self, x, y):
        x = np.atleast_2d(np.asarray(x, float))
        y = abs(float(y))
        idx = _node_indices(self.box, x)
        if idx is not None:
            return self.level(y)[idx]
        pts = np.column_stack([x, np.full(len(x), y)])
        return np.asarray(log_potential(self.w, pts).value)


def dirichlet_extend(u: GridField3, points, window: Optional[Window] = None) -> HalfSpaceField:
    """Sample the Poisson extension of u at half-space points (M, 4)."""
    pts = np.atleast_2d(np.asarray(points, float))
    if pts.shape[-1] != 4 or np.any(pts[:, 3] < 0):
        raise DomainError("points must be (x1, x2, x3, y) with y >= 0")
    U = DirichletExtension(u, window)
    vals = np.empty(len(pts))
    for y in np.unique(pts[:, 3]):
        m = pts[:, 3] == y
        vals[m] = U(pts[m, :3], y)
    return HalfSpaceField(pts, vals, "dirichlet_extension")


def neumann_extend(w: GridField3, points, correct: bool = True) -> HalfSpaceField:
    """Sample the log potential of w at half-space points (M, 4)."""
    pts = np.atleast_2d(np.asarray(points, float))
    if pts.shape[-1] != 4 or np.any(pts[:, 3] < 0):
        raise DomainError("points must be (x1, x2, x3, y) with y >= 0")
    V = NeumannPotential(w, correct=correct)
    vals = np.empty(len(pts))
    for y in np.unique(pts[:, 3]):
        m = pts[:, 3] == y
        vals[m] = V(pts[m, :3], y)
    return HalfSpaceField(pts, vals, "neumann_potential")


# ---------------------------------------------------------------------------
# the boundary operator


class TraceResult(NamedTuple):
    value: np.ndarray
    error: np.ndarray
    flagged: np.ndarray
    ratio: np.ndarray
    step: float


_UNIT = np.array([[0, 0, 0], [1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], float)


def _slope(U, x, s, hx, cache):
    """One-sided d/dy at 0 of D = Delta_x U + d_yy U from levels s, 2s, 3s."""
    M = len(x)
    stencil = (x[:, None, :] + hx * _UNIT[None, :, :]).reshape(-1, 3)

    def Ux(y):
        key = round(abs(y), 15)
        if key not in cache:
            cache[key] = np.asarray(U(stencil, abs(y)), float).reshape(M, 7)
        return cache[key]

    D = []
    for j in (1, 2, 3):
        y = j * s
        c = Ux(y)
        lap_x = (c[:, 1:].sum(axis=1) - 6.0 * c[:, 0]) / hx ** 2
        # U(x, |y|): the stencil reflects through y = 0
        dyy = (Ux(y + s)[:, 0] - 2.0 * c[:, 0] + Ux(y - s)[:, 0]) / s ** 2
        D.append(lap_x + dyy)
    return (-2.5 * D[0] + 4.0 * D[1] - 1.5 * D[2]) / s


def neumann_trace_L32(U: Callable, x, h: Optional[float] = None, ratio_threshold: float = 1.5,
                      noise_floor: float = 1e-3) -> TraceResult:
    """L_{3/2} U(x) = 1/2 lim_{y -> 0} d_y Delta U(x, y).

    The 4D Laplacian D = Delta_x U + d_yy U is formed with centered
    differences at heights s, 2s, 3s (the y-stencil uses U(x, |y|)), its
    slope at y = 0 comes from the quadratic through those three values, and
    the slopes for s = h and s = h/2 are combined by Richardson extrapolation
    (order 2).  A third slope at s = 2h gives the ratio test: the result is
    flagged when (b(2h) - b(h)) / (b(h) - b(h/2)) < ``ratio_threshold``
    while the differences exceed ``noise_floor`` times the largest slope
    over the batch (below that the level data are at their accuracy limit
    and the ratio carries no information).

    The x-step is ``U.spacing`` when the evaluable defines it (grid-based
    extensions), otherwise h.  The default h is a quarter of the x-step.
    """
    x = np.atleast_2d(np.asarray(x, float))
    hx = float(getattr(U, "spacing", 0.0)) or None
    if h is None:
        if hx is None:
            raise DomainError("a y-step is required for evaluables without a grid spacing")
        h = 0.25 * hx
    if h <= 0:
        raise DomainError("step must be positive")
    hx = hx or h
    cache = {}
    b2 = _slope(U, x, 2 * h, hx, cache)
    b1 = _slope(U, x, h, hx, cache)
    b0 = _slope(U, x, 0.5 * h, hx, cache)
    fine = 0.5 * (4.0 * b0 - b1) / 3.0
    err = 0.5 * np.abs(b0 - b1) / 3.0
    d1 = b2 - b1
    d0 = b1 - b0
    scale = np.maximum(np.max(np.abs(b0)), 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(d0 != 0, d1 / d0, np.inf)
    tiny = (np.abs(d0) < noise_floor * scale) & (np.abs(d1) < noise_floor * scale)
    flagged = (ratio < ratio_threshold) & ~tiny
    return TraceResult(fine, err, flagged, ratio, float(h))


# ---------------------------------------------------------------------------
# spectral operator


def _radial_model_amplitude(values, r, exponent):
    keep = r > 0
    if not np.any(keep):
        return 0.0
    return float(np.median(values[keep] * r[keep] ** exponent))


def spectral_fraclap(u: GridField3, power: float = 1.5, pad: int = 2,
                     window: Optional[Window] = None) -> GridField3:
    """(-Delta)^power u by FFT on the box grid (symbol |xi|^{2 power}, zero at xi = 0).

    Compactly supported data are zero padded by ``pad`` per axis.  Data with
    a log or power tail are windowed; the far part (1 - w) m is added back by
    the hypersingular integral, so results are valid inside the window radius
    r1 (recorded in ``meta['valid_radius']``).
    """
    if power <= 0:
        raise DomainError("power must be positive")
    box = u.box
    model = u.decay_model
    warn = []
    if model.kind == "compact_support":
        win = None
        data = u.values
        if not u.decay_consistent():
            warn.append("boundary ring is not small: periodization error may exceed tolerance")
    else:
        win = window or default_window(u)
        data = u.values * win(box.points()).reshape(box.shape)
    shape = box.shape
    pshape = tuple(pad * n for n in shape)
    h = box.spacing[::-1]  # array axis order
    ks = [2 * np.pi * fft.fftfreq(pshape[0], h[0])[:, None, None],
          2 * np.pi * fft.fftfreq(pshape[1], h[1])[None, :, None],
          2 * np.pi * fft.rfftfreq(pshape[2], h[2])[None, None, :]]
    k2 = ks[0] ** 2 + ks[1] ** 2 + ks[2] ** 2
    sym = k2 ** power
    sym[0, 0, 0] = 0.0
    F = fft.rfftn(data, s=pshape, workers=workers())
    out = fft.irfftn(F * sym, s=pshape, workers=workers())[:shape[0], :shape[1], :shape[2]].copy()
    del F
    meta = {"power": power}
    pts = box.points()
    if win is not None:
        a = np.linalg.norm(pts - np.asarray(win.center), axis=1)
        inside = a < win.r1
        table = _RadialTable(lambda t: far_fraclap(t, power, win, model), win.r1)
        flat = out.ravel()
        flat[inside] += table(a[inside])
        out = flat.reshape(shape)
        meta["valid_radius"] = win.r1
        warn.append(f"values beyond radius {win.r1:g} of the model center omit the far field")
        amp = _radial_model_amplitude(out.ravel()[inside & (a > 0.8 * win.r1)],
                                      a[inside & (a > 0.8 * win.r1)], 3 + 2 * power)
        center = win.center
    else:
        meta["valid_radius"] = float(min(box.half_widths))
        amp = fraclap_constant(3, power) * u.integral()
        center = tuple(box.center)
    if warn:
        meta["warnings"] = warn
    dm = DecayModel.power(amp, 3 + 2 * power, center)
    return GridField3(box, out, dm, meta)


# ---------------------------------------------------------------------------
# consistency checks


class RelationReport(NamedTuple):
    points: np.ndarray
    trace: np.ndarray
    spectral: np.ndarray
    residual: np.ndarray
    scale: float
    max_abs: float
    max_rel: float
    mean_abs: float
    flagged: int
    step: float


def probe_nodes(box: Box3, radius: float, center=None) -> np.ndarray:
    """Grid nodes within ``radius`` of ``center`` (default: box center)."""
    c = np.asarray(box.center if center is None else center, float)
    pts = box.points()
    return pts[np.linalg.norm(pts - c, axis=1) <= radius + 1e-12]


def check_relation(u: GridField3, probe_radius: float = 2.0, h: Optional[float] = None,
                   window: Optional[Window] = None, center=None) -> RelationReport:
    """Compare L_{3/2} of the Poisson extension with the spectral (-Delta)^{3/2}.

    Residuals are reported in absolute terms and relative to the scale
    sup |(-Delta)^{3/2} u| over the probe set.
    """
    U = DirichletExtension(u, window)
    if center is None:
        center = u.decay_model.center if u.decay_model.kind != "compact_support" else u.box.center
    pts = probe_nodes(u.box, probe_radius, center)
    if U.window is not None and probe_radius + 2 * U.spacing >= U.window.r1:
        raise DomainError("probe radius reaches the window transition")
    tr = neumann_trace_L32(U, pts, h)
    sp = spectral_fraclap(u, 1.5, window=U.window)
    idx = _node_indices(u.box, pts)
    spv = sp.values[idx]
    res = np.abs(tr.value - spv)
    scale = float(np.max(np.abs(spv)))
    if scale == 0:
        scale = 1.0
    return RelationReport(pts, tr.value, spv, res, scale, float(res.max()), float(res.max() / scale),
                          float(res.mean()), int(np.sum(tr.flagged)), tr.step)


def laplacian4(U: Callable, X, hx: float, hy: float):
    """Second-order 9-point Laplacian in R^4 at points X (M, 4); U(x, y) evaluable."""
    X = np.atleast_2d(np.asarray(X, float))
    out = np.zeros(len(X))
    for m, P in enumerate(X):
        c = float(U(P[None, :3], P[3])[0])
        acc = 0.0
        for i in range(3):
            e = np.zeros(3)
            e[i] = hx
            acc += (float(U((P[:3] + e)[None], P[3])[0]) + float(U((P[:3] - e)[None], P[3])[0]) - 2 * c) / hx ** 2
        acc += (float(U(P[None, :3], abs(P[3] + hy))[0]) + float(U(P[None, :3], abs(P[3] - hy))[0])
                - 2 * c) / hy ** 2
        out[m] = acc
    return out


def _bilaplacian_fd(U, X, hx, hy):
    offs = [np.zeros(4)]
    for i in range(4):
        e = np.zeros(4)
        e[i] = hx if i < 3 else hy
        offs += [e, -e]
    pts = np.array([X + o for o in offs])
    L = laplacian4(U, pts, hx, hy)
    acc = 0.0
    for i in range(4):
        step = hx if i < 3 else hy
        acc += (L[1 + 2 * i] + L[2 + 2 * i] - 2 * L[0]) / step ** 2
    return float(acc), pts


def biharmonic_residual(U: Callable, X, h: Optional[float] = None, richardson: bool = True):
    """Finite-difference Delta^2 U at the interior point X = (x, y), y > 0.

    The 9-point discrete Laplacian (x-step ``U.spacing`` when present,
    otherwise h; y-step h) is applied twice, which is exact on polynomials of
    degree four.  With ``richardson`` the O(h^2) term is removed by combining
    steps (hx, h) and (2hx, 2h); this needs y >= 4h.  Returns (value, scale)
    with scale the largest |U| on the stencil.
    """
    X = np.asarray(X, float).ravel()
    if X.shape != (4,):
        raise DomainError("X must be a point of R^4")
    hx = float(getattr(U, "spacing", 0.0)) or None
    if h is None:
        if hx is None:
            raise DomainError("a step is required for evaluables without a grid spacing")
        h = hx
    hx = hx or h
    reach = 4 * h if richardson else 2 * h
    if X[3] - reach < -1e-12 * h:
        raise DomainError(f"stencil leaves the half-space; need y >= {reach / h:g} h")
    d1, pts = _bilaplacian_fd(U, X, hx, h)
    value = d1
    if richardson:
        d2, _ = _bilaplacian_fd(U, X, 2 * hx, 2 * h)
        value = (4.0 * d1 - d2) / 3.0
    vals = [abs(float(U(p[None, :3], p[3])[0])) for p in pts]
    return float(value), float(max(vals))
