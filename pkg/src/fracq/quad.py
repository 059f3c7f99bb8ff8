"""Integration engines.

Radial integrals over R^n, adaptive box integrals over R^3, ball integrals
over R^4, the logarithmic potential of a grid density, and weighted tail
norms.  Every integrator returns a ``QuadResult(value, error)``.
"""
from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import integrate

from .errors import DomainError, QuadratureError
from .fields import Box3, GridField3
from .specfun import gamma_fn


class QuadResult(NamedTuple):
    value: float
    error: float


@dataclass(frozen=True)
class TailWeight:
    """Weight 1/(1+|x|^s) defining the space L_s."""

    s: float = 6.0

    def __post_init__(self):
        if not (self.s > 0):
            raise DomainError("tail weight exponent must be positive")

    def __call__(self, r):
        return 1.0 / (1.0 + np.asarray(r, float) ** self.s)


def sphere_area(n: int) -> float:
    """|S^{n-1}| = 2 pi^{n/2} / Gamma(n/2)."""
    return 2.0 * math.pi ** (n / 2.0) / gamma_fn(n / 2.0)


def integrate_radial(f: Callable, n: int, tol: float = 1e-10,
                     tail: Optional[Callable] = None, rmax: Optional[float] = None) -> QuadResult:
    """|S^{n-1}| * int_0^inf r^{n-1} f(r) dr.

    Without ``tail`` the half-line is handled by QUADPACK's infinite-range
    transformation.  With ``tail``, the integral is cut at ``rmax`` (default 40)
    and ``tail(rmax)`` must return ``(value, bound)`` for the remainder
    int_rmax^inf r^{n-1} f(r) dr.
    """
    if n < 1:
        raise DomainError("dimension must be positive")
    area = sphere_area(n)

    def g(r):
        return r ** (n - 1) * f(r)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        v1, e1 = integrate.quad(g, 0.0, 1.0, epsabs=0.1 * tol / area, epsrel=1e-13, limit=200)
        if tail is None:
            v2, e2 = integrate.quad(g, 1.0, np.inf, epsabs=0.1 * tol / area, epsrel=1e-13, limit=400)
            tv, tb = 0.0, 0.0
        else:
            R = 40.0 if rmax is None else float(rmax)
            v2, e2 = integrate.quad(g, 1.0, R, epsabs=0.1 * tol / area, epsrel=1e-13, limit=400)
            tv, tb = tail(R)
    value = area * (v1 + v2 + tv)
    err = area * (e1 + e2 + abs(tb))
    if not math.isfinite(value) or err > tol * max(1.0, abs(value)):
        raise QuadratureError(f"radial integral missed tolerance {tol}: error {err}", value, err)
    return QuadResult(value, err)


_GL_CACHE = {}


def _gl(n):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _tensor_rule(lo, hi, n):
    x, w = _gl(n)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    g = [mid[k] + half[k] * x for k in range(3)]
    p = np.stack(np.meshgrid(*g, indexing="ij"), axis=-1).reshape(-1, 3)
    wt = np.einsum("i,j,k->ijk", w, w, w).ravel() * np.prod(half)
    return p, wt


def integrate_box3(f: Callable, box: Box3, tol: float = 1e-8, max_boxes: int = 20000,
                   orders=(6, 10)) -> QuadResult:
    """Adaptive tensor Gauss-Legendre over a box in R^3.

    ``f`` maps an (M, 3) array of points to M values.  Each sub-box gets a
    low and a high order tensor rule; the difference is its error estimate.
    The sub-box with the largest estimate is bisected along every axis until
    the summed estimate is below ``tol``.  Sub-box results are summed in a
    fixed order so the reduction is deterministic.
    """
    lo0 = np.asarray(box.center) - np.asarray(box.half_widths)
    hi0 = np.asarray(box.center) + np.asarray(box.half_widths)
    n1, n2 = orders

    def rule(lo, hi):
        p, w = _tensor_rule(lo, hi, n2)
        q2 = float(np.dot(w, f(p)))
        p, w = _tensor_rule(lo, hi, n1)
        q1 = float(np.dot(w, f(p)))
        return q2, abs(q2 - q1)

    counter = 0
    val, err = rule(lo0, hi0)
    heap = [(-err, counter, lo0, hi0, val, err)]
    done = []
    total_err = err
    while total_err > tol:
        if len(heap) + len(done) > max_boxes:
            value = sum(item[4] for item in sorted(heap + done, key=lambda t: t[1]))
            raise QuadratureError(f"integrate_box3 exceeded {max_boxes} sub-boxes", value, total_err)
        _, _, lo, hi, v, e = heapq.heappop(heap)
        total_err -= e
        mid = 0.5 * (lo + hi)
        for corner in range(8):
            bits = [(corner >> k) & 1 for k in range(3)]
            clo = np.where(bits, mid, lo)
            chi = np.where(bits, hi, mid)
            cv, ce = rule(clo, chi)
            counter += 1
            total_err += ce
            if ce < 1e-3 * tol / 8:
                done.append((0.0, counter, clo, chi, cv, ce))
            else:
                heapq.heappush(heap, (-ce, counter, clo, chi, cv, ce))
        if not heap:
            break
    items = sorted(heap + done, key=lambda t: t[1])
    value = math.fsum(item[4] for item in items)
    return QuadResult(value, max(total_err, 0.0))


def _ball4_rule(center, r, n, upper=False):
    """Product rule on the 4-ball: radius x three hyperspherical angles.

    With ``upper`` the rule covers only the half-ball y >= center_y, with the
    polar axis along y so the plane y = center_y is a face of the domain.
    """
    xr, wr = _gl(n)
    rho = 0.5 * r * (xr + 1)
    wrho = 0.5 * r * wr * rho ** 3
    xa, wa = _gl(2 * n)
    top = 0.5 * math.pi if upper else math.pi
    psi = 0.5 * top * (xa + 1)
    wpsi = 0.5 * top * wa * np.sin(psi) ** 2
    th = psi
    wth = 0.5 * math.pi * wa * np.sin(th)
    nphi = 2 * n
    phi = 2 * math.pi * np.arange(nphi) / nphi
    wphi = np.full(nphi, 2 * math.pi / nphi)
    R, P, T, F = np.meshgrid(rho, psi, th, phi, indexing="ij")
    W = np.einsum("a,b,c,d->abcd", wrho, wpsi, wth, wphi).ravel()
    sp, st = np.sin(P), np.sin(T)
    X = np.stack([R * np.cos(P), R * sp * np.cos(T), R * sp * st * np.cos(F),
                  R * sp * st * np.sin(F)], axis=-1).reshape(-1, 4)
    if upper:
        X = X[:, [1, 2, 3, 0]]
    return X + np.asarray(center, float), W


def integrate_ball4(f: Callable, center, r: float, tol: float = 1e-10,
                    n_start: int = 6, n_max: int = 48, upper: bool = False) -> QuadResult:
    """Integral of f over the ball B_r(center) in R^4 (its upper half in y with ``upper``).

    Gauss-Legendre in the radius and the two polar angles, trapezoid in the
    azimuth.  The order is doubled until two successive values agree to
    ``tol``; the last difference is the error estimate.
    """
    if r <= 0:
        raise DomainError("ball radius must be positive")
    center = np.asarray(center, float)
    if center.shape != (4,):
        raise DomainError("ball center must be a point of R^4")
    prev = None
    n = n_start
    while True:
        X, W = _ball4_rule(center, r, n, upper)
        val = float(np.dot(W, f(X)))
        if prev is not None:
            err = abs(val - prev)
            if err <= tol * max(1.0, abs(val)) or 2 * n > n_max:
                if err > tol * max(1.0, abs(val)):
                    raise QuadratureError(f"ball integral missed tolerance {tol}", val, err)
                return QuadResult(val, err)
        prev = val
        n *= 2


def ball4_volume(r: float) -> float:
    return 0.5 * math.pi ** 2 * r ** 4


# ---------------------------------------------------------------------------
# logarithmic potential

_CELL_GL = 16


def _lam_log_moment(R, y):
    """int_0^1 lam^2 log(lam^2 R^2 + y^2) dlam."""
    R = np.asarray(R, float)
    out = np.empty_like(R)
    if y == 0:
        return (2.0 / 3.0) * np.log(R) - 2.0 / 9.0
    # subnormal y overflows t and 1/q; both limits are still correct
    with np.errstate(over="ignore", divide="ignore"):
        t = R / y
        small = t < 0.02
        ts = t[small]
        out[small] = (2.0 / 3.0) * math.log(y) + ts ** 2 / 5 - ts ** 4 / 14 + ts ** 6 / 27
        Rb = R[~small]
        q = y / Rb
        out[~small] = (np.log(Rb * Rb + y * y) / 3.0
                       - (2.0 / 3.0) * (1.0 / 3.0 - q * q + q ** 3 * np.arctan(1.0 / q)))
    return out


def cell_average_log(offset, y: float, h) -> np.ndarray:
    """Exact mean of log(|z|^2 + y^2) over cells [offset - h/2, offset + h/2].

    ``offset`` is (M, 3): cell centers relative to the evaluation point.  The
    cell is split into cones from the evaluation point over its six faces;
    the radial integral along each cone is done in closed form and the face
    integrals by tensor Gauss-Legendre.
    """
    off = np.atleast_2d(np.asarray(offset, float))
    h = np.broadcast_to(np.asarray(h, float), (3,))
    x, w = _gl(_CELL_GL)
    total = np.zeros(off.shape[0])
    for k in range(3):
        i, j = [a for a in range(3) if a != k]
        for sgn in (-1.0, 1.0):
            d = off[:, k] + sgn * 0.5 * h[k]          # face coordinate along k
            dist = sgn * d                             # signed distance, outward normal
            ui = off[:, i][:, None, None] + 0.5 * h[i] * x[None, :, None]
            uj = off[:, j][:, None, None] + 0.5 * h[j] * x[None, None, :]
            R = np.sqrt(ui ** 2 + uj ** 2 + d[:, None, None] ** 2)
            nz = dist != 0
            if not np.any(nz):
                continue
            Im = _lam_log_moment(R[nz], y)
            face = np.einsum("mab,a,b->m", Im, w, w) * 0.25 * h[i] * h[j]
            total[nz] += dist[nz] * face
    return total / np.prod(h)


def _as_points4(X):
    X = np.atleast_2d(np.asarray(X, float))
    if X.shape[-1] != 4:
        raise DomainError("half-space points must have 4 coordinates (x1, x2, x3, y)")
    if np.any(X[:, 3] < 0):
        raise DomainError("half-space points need y >= 0")
    return X


def log_potential(w: GridField3, X, near: int = 2) -> QuadResult:
    """V(X) = (1/2 pi^2) int log(1/|X - (z, 0)|) w(z) dz for a grid density.

    Each node carries the cell around it.  Cells within ``near`` cells of the
    projection of X use the exact cell average of the kernel when X is within
    four cells of the boundary plane; all other cells use the midpoint rule.
    Accepts one point or an (M, 4) array; returns arrays in the latter case.
    The error estimate adds the size of the near-cell corrections to a
    second-order midpoint error bound.
    """
    pts = _as_points4(X)
    box = w.box
    h = box.spacing
    hmin = float(h.min())
    nodes = box.points()
    wv = w.values.ravel()
    nzmask = wv != 0
    nodes = nodes[nzmask]
    wv = wv[nzmask]
    cv = box.cell_volume
    c = 1.0 / (4.0 * math.pi ** 2)
    vals = np.empty(len(pts))
    errs = np.empty(len(pts))
    for m, P in enumerate(pts):
        dz = nodes - P[:3]
        y = float(P[3])
        r2 = np.einsum("ij,ij->i", dz, dz)
        rho2 = r2 + y * y
        if y < 4 * hmin:
            nr = np.all(np.abs(dz) <= (near + 0.5) * h, axis=1)
        else:
            nr = np.zeros(len(dz), bool)
        far = ~nr
        if np.any(rho2[far] == 0):
            raise DomainError("evaluation point coincides with a node outside the near zone")
        logs = np.zeros(len(dz))
        logs[far] = np.log(rho2[far])
        corr = 0.0
        if np.any(nr):
            avg = cell_average_log(dz[nr], y, h)
            mid = np.where(rho2[nr] > 0, np.log(np.where(rho2[nr] > 0, rho2[nr], 1.0)), avg)
            logs[nr] = avg
            corr = float(np.sum(np.abs(wv[nr] * (avg - mid))))
        vals[m] = -c * cv * math.fsum(wv * logs)
        lap = np.zeros(len(dz))
        lap[far] = 1.0 / rho2[far]
        errs[m] = c * cv * (corr + (hmin ** 2 / 24.0) * 2.0 * float(np.sum(np.abs(wv) * lap)))
    if np.ndim(X) == 1:
        return QuadResult(float(vals[0]), float(errs[0]))
    return QuadResult(vals, errs)


def weighted_tail_norm(u: GridField3, weight: TailWeight = TailWeight(6.0)) -> QuadResult:
    """int_{R^3} |u(x)| / (1 + |x|^s) dx.

    Nodes inside the ball of radius 0.98 * (smallest half-width) about the
    decay-model center are summed with the node rule; outside it the decay
    model supplies an analytic tail, integrated in (r, cos theta) about the
    model center.

    Raises
    ------
    DomainError
        When the model tail is not integrable against the weight.
    """
    model = u.decay_model
    c = np.asarray(model.center)
    R = 0.98 * min(u.box.half_widths) - np.max(np.abs(c - np.asarray(u.box.center)))
    pts = u.box.points()
    rr = np.linalg.norm(pts - c, axis=1)
    inside = rr < R if model.kind != "compact_support" else np.ones(len(rr), bool)
    r0 = np.linalg.norm(pts[inside], axis=1)
    vals = np.abs(u.values.ravel()[inside]) * weight(r0)
    grid = float(vals.sum() * u.box.cell_volume)
    if model.kind == "compact_support":
        return QuadResult(grid, 0.0)
    p = model.growth_exponent()
    if 2.0 + p - weight.s >= -1.0:
        raise DomainError(
            f"tail |u| ~ r^{p:g} is not integrable against 1/(1+|x|^{weight.s:g})")
    cn = float(np.linalg.norm(c))
    # radial map r = R / t on (0, 1], Gauss-Legendre in t and cos(theta)
    xt, wt = _gl(64)
    t = 0.5 * (xt + 1)
    wt = 0.5 * wt
    xc, wc = _gl(32)
    r = R / t
    T, C = np.meshgrid(r, xc, indexing="ij")
    dist = np.sqrt(np.maximum(T * T + cn * cn + 2 * T * cn * C, 0.0))
    integrand = np.abs(model.radial(T)) * weight(dist) * 2 * math.pi * T ** 2
    jac = R / t ** 2
    tail = float(np.einsum("ij,i,j->", integrand, wt * jac, wc))
    # second-order midpoint error on the grid part plus a 1% tail allowance
    return QuadResult(grid + tail, 0.01 * abs(tail) + 1e-3 * abs(grid))
