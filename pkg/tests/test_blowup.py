import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracq import _poly
from fracq.blowup import (THRESHOLD, ConcentrationReport, beta_k, brezis_merle_probe, decompose, detect_S1,
                          local_mass, mollified_point_mass, pizzetti_check)
from fracq.errors import DomainError
from fracq.fields import Box3, GridField3
from fracq.liouville import LAMBDA_1, BubbleSpec, bubble_field, bubble_mass, scaled_family


def test_threshold_is_half_the_bubble_mass():
    assert THRESHOLD == pytest.approx(0.5 * 2 * bubble_mass(BubbleSpec()).value, rel=1e-3)


def test_local_mass_of_constant_field():
    assert local_mass(1.0, 0.0, (0, 0, 0), 2.0) == pytest.approx(4 / 3 * math.pi * 8, rel=1e-10)


@settings(max_examples=10)
@given(st.floats(0.05, 2.0), st.floats(0.05, 2.0))
def test_local_mass_monotone_and_additive(r1, r2):
    a, b = sorted((r1, r2))
    u = lambda x: -np.sum(x * x, axis=1)
    ma = local_mass(1.0, u, (0.1, 0, 0), a)
    mb = local_mass(1.0, u, (0.1, 0, 0), b)
    assert mb >= ma - 1e-10
    total = local_mass(1.0, u, (0.1, 0, 0), math.inf)
    assert total == pytest.approx((math.pi / 3) ** 1.5, rel=1e-7)


def test_local_mass_of_grid_bubble_over_space():
    u = bubble_field(BubbleSpec(), Box3.cube(8.0, 64))
    assert local_mass(2.0, u, (0, 0, 0), math.inf) == pytest.approx(LAMBDA_1, rel=1e-3)


def test_local_mass_rejects_bad_radius():
    with pytest.raises(DomainError):
        local_mass(1.0, 0.0, (0, 0, 0), 0.0)


def _family():
    box = Box3.cube(1.5, 64)
    return [scaled_family(BubbleSpec(), k, box) for k in (4, 8)]


def test_detect_S1_finds_bubble_center():
    rep = detect_S1(2.0, _family(), [[0, 0, 0], [1, 0, 0]], [0.5, 1.0])
    assert rep.S1 == [(0.0, 0.0, 0.0)]
    assert rep.verdicts == ["above", "below"]
    assert rep.per_member.shape == (2, 2, 2)
    assert "verdict" in rep.to_csv().splitlines()[0]
    assert rep.to_json()["S1"] == [[0.0, 0.0, 0.0]]


def test_detect_S1_relabeling_invariance():
    fam = _family()
    a = detect_S1(2.0, fam, [[0, 0, 0], [1, 0, 0]], [0.5, 1.0])
    b = detect_S1(2.0, fam, [[1, 0, 0], [0, 0, 0]], [1.0, 0.5])
    assert a.verdicts == b.verdicts[::-1]
    np.testing.assert_allclose(a.masses, b.masses[::-1])


def test_detect_S1_rigid_motion_invariance():
    box = Box3.cube(1.5, 64)
    shift = np.array([0.25, -0.125, 0.0])
    fam = [bubble_field(BubbleSpec(tuple(shift), 8.0), Box3.cube(1.5, 64, center=tuple(shift)))]
    a = detect_S1(2.0, [scaled_family(BubbleSpec(), 8, box)], [[0, 0, 0]], [0.5])
    b = detect_S1(2.0, fam, [shift], [0.5])
    assert a.verdicts == b.verdicts
    assert b.masses[0, 0] == pytest.approx(a.masses[0, 0], rel=1e-6)


def test_detect_S1_validation():
    with pytest.raises(DomainError):
        detect_S1(2.0, [], [[0, 0, 0]], [0.5])
    with pytest.raises(DomainError):
        detect_S1(2.0, _family(), [[0, 0, 0]], [0.0])
    with pytest.raises(DomainError):
        detect_S1([2.0], _family(), [[0, 0, 0]], [0.5])


def test_decompose_bubble():
    u = bubble_field(BubbleSpec(), Box3.cube(8.0, 32))
    d = decompose(u, 2.0)
    np.testing.assert_allclose(d.v.values + d.h.values, u.values)
    assert d.h.decay_model.kind == "log_growth"


def test_beta_constant_and_polynomial():
    one = lambda X: np.ones(len(X))
    assert beta_k(one, (0, 0, 0), 1.0) == pytest.approx(math.pi ** 2 / 2, rel=1e-10)
    # |H| reads H(x, |y|): an odd-in-y field gives twice the upper half
    odd = lambda X: X[:, 3]
    # int over the unit 4-ball of |y| = |S^3| / 5 * E|y| on S^3 = 2 pi^2 / 5 * 4 / (3 pi)
    assert beta_k(odd, (0, 0, 0), 1.0) == pytest.approx(8 * math.pi / 15, rel=1e-8)
    with pytest.raises(DomainError):
        beta_k(one, (0, 0, 0), 0.0)


@settings(max_examples=5)
@given(st.integers(0, 10_000), st.floats(0.3, 2.0))
def test_pizzetti_random_biharmonic(seed, r):
    rng = np.random.default_rng(seed)
    P = _poly.Poly4(_poly.random_biharmonic(rng))
    c = rng.uniform(-1, 1, 4)
    exact = pizzetti_check(P, c, r, laplacian=P.laplacian)
    assert abs(exact.residual) <= max(10 * exact.error, 1e-8)
    fd = pizzetti_check(P, c, r)
    assert abs(fd.residual) <= max(10 * fd.error, 1e-8)


def test_pizzetti_detects_non_biharmonic():
    r4 = lambda X: np.sum(X * X, axis=1) ** 2
    chk = pizzetti_check(r4, np.zeros(4), 1.0)
    assert abs(chk.residual) > 1e-3


def test_mollifier_mass():
    box = Box3.cube(1.0, 32, cell_centered=True)
    w = mollified_point_mass(box, math.pi ** 2)
    assert w.integral() == pytest.approx(math.pi ** 2, rel=1e-12)
    with pytest.raises(DomainError):
        mollified_point_mass(box, 1.0, width_cells=0.5)


def test_brezis_merle_trivial_and_restriction():
    K = Box3.cube(1.0, 16, cell_centered=True)
    zero = GridField3(K, np.zeros(K.shape))
    r = brezis_merle_probe(zero, 2.0)
    assert r.value == pytest.approx(8.0) and r.coarse == pytest.approx(8.0)
    assert not r.divergent
    with pytest.raises(DomainError):
        brezis_merle_probe(GridField3(Box3.cube(1.0, 16), np.zeros((16, 16, 16))), 1.0)


def test_brezis_merle_trend_orders_with_p():
    f = lambda b: mollified_point_mass(b, math.pi ** 2)
    lo = brezis_merle_probe(f, 1.0, n=16)
    hi = brezis_merle_probe(f, 3.0, n=16)
    assert hi.trend > lo.trend > 1.0
    assert hi.divergent and not lo.divergent


def test_concentration_report_type():
    rep = detect_S1(2.0, _family()[:1], [[0, 0, 0]], [0.5])
    assert isinstance(rep, ConcentrationReport)
    assert rep.ratios == [1.0]
