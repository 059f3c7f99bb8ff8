import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracq import _poly
from fracq._lattice import RHO_CELLS, LatticeConvolver, kernel_spectrum, poisson3


def test_kernel_spectrum_is_cached_and_read_only():
    a = kernel_spectrum("poisson", (16, 16, 16), 0.25, 0.5)
    b = kernel_spectrum("poisson", (16, 16, 16), 0.25, 0.5)
    assert a is b
    with pytest.raises(ValueError):
        a[0, 0, 0] = 1.0


def test_poisson_level_matches_direct_sum():
    n, h, y = 16, 0.25, 0.6
    ax = (np.arange(n) - n // 2) * h
    X = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), -1)
    f = np.exp(-np.sum(X * X, axis=-1))
    lvl = LatticeConvolver(f, h, "poisson", correct=False).level(y)
    i = (n // 2, n // 2 + 1, n // 2 - 2)
    d = X - X[i]
    direct = np.sum(poisson3(np.sum(d * d, axis=-1), y) * f) * h ** 3
    assert lvl[i] == pytest.approx(direct, rel=1e-12)


def test_correction_improves_small_height():
    n, h = 32, 0.25
    ax = (np.arange(n) - n // 2) * h
    X = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), -1)
    f = np.exp(-np.sum(X * X, axis=-1))
    y = 0.25 * h
    # exact U(0, y) for the Gaussian
    from scipy import integrate
    ref = integrate.quad(lambda r: 4 / math.pi ** 2 * y ** 3 / (y * y + r * r) ** 3 * math.exp(-r * r)
                         * 4 * math.pi * r * r, 0, 8, points=[y, 10 * y], limit=200)[0]
    c = n // 2
    plain = LatticeConvolver(f, h, "poisson", correct=False).level(y)[c, c, c]
    fixed = LatticeConvolver(f, h, "poisson").level(y)[c, c, c]
    assert abs(fixed - ref) < 0.1 * abs(plain - ref)
    assert RHO_CELLS == 8.0


@settings(max_examples=15)
@given(st.integers(0, 10_000))
def test_random_biharmonic_polynomials(seed):
    c = _poly.random_biharmonic(np.random.default_rng(seed))
    bl = _poly.laplacian(_poly.laplacian(c))
    scale = max(abs(v) for v in c.values())
    assert all(abs(v) <= 1e-12 * 192 * scale for v in bl.values())
    P = _poly.Poly4(c)
    X = np.random.default_rng(seed + 1).normal(size=(5, 4))
    h = 1e-3
    e = np.eye(4) * h
    fd = sum((P(X + e[i]) + P(X - e[i]) - 2 * P(X)) / h ** 2 for i in range(4))
    np.testing.assert_allclose(P.laplacian(X), fd, atol=1e-4 * max(1.0, np.abs(fd).max()))


def test_bilaplacian_of_r4_is_192():
    r4 = {}
    for i in range(4):
        for j in range(4):
            e = [0, 0, 0, 0]
            e[i] += 2
            e[j] += 2
            r4[tuple(e)] = r4.get(tuple(e), 0.0) + 1.0
    bl = _poly.clean(_poly.laplacian(_poly.laplacian(r4)))
    assert bl == {(0, 0, 0, 0): pytest.approx(192.0)}
