import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracq.errors import ApproximationWarning, DomainError
from fracq.fields import Box3
from fracq.liouville import (LAMBDA_1, BiharmonicProfile, BubbleSpec, FixedPointConfig, T_map, ZeroSet,
                             admissible_epsilon, blowup_sequence, bubble_field, bubble_mass, bubble_u, c_k,
                             contraction_estimate, kernel_class_poly, lambda_k, scaled_family,
                             solve_fixed_point, sup_bound_holds, total_curvature)

SMALL = Box3.cube(1.0, 16, cell_centered=True)


def test_lambda_1():
    assert LAMBDA_1 == pytest.approx(4 * math.pi ** 2)


@given(st.floats(0.1, 10.0))
def test_total_curvature_is_scale_invariant(lam):
    assert total_curvature(BubbleSpec(scale=lam)) == pytest.approx(LAMBDA_1, rel=1e-10)


@given(st.floats(0.2, 5.0), st.floats(0.01, 5.0))
def test_partial_mass_depends_on_lambda_r_only(lam, r):
    a = bubble_mass(BubbleSpec(scale=lam), r).value
    b = bubble_mass(BubbleSpec(scale=1.0), lam * r).value
    assert a == pytest.approx(b, rel=1e-9)


@given(st.floats(0.5, 4.0), st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_scaled_family_identity(k, x):
    x = np.array(x)
    spec = BubbleSpec((0.3, 0.0, -0.2), 1.3)
    lhs = bubble_u(spec.scaled(k), x)
    rhs = bubble_u(spec, k * x) + math.log(k)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_bubble_asymptotics_and_maximum():
    spec = BubbleSpec(scale=2.0)
    assert bubble_u(spec, np.zeros(3)) == pytest.approx(math.log(4.0))
    far = np.array([1e4, 0.0, 0.0])
    assert bubble_u(spec, far) + 2 * math.log(1e4) == pytest.approx(math.log(2 / 2.0), abs=1e-7)


def test_bubble_validation_and_approximate_flag():
    with pytest.raises(DomainError):
        BubbleSpec(scale=0.0)
    with pytest.raises(DomainError):
        BubbleSpec(scale=-1.0)
    with pytest.raises(DomainError):
        BubbleSpec(quad_coefficient=-1.0)
    with pytest.warns(ApproximationWarning):
        bubble_u(BubbleSpec(quad_coefficient=0.5), np.zeros(3))
    with pytest.raises(DomainError):
        bubble_mass(BubbleSpec(quad_coefficient=0.5))


def test_bubble_field_model():
    f = bubble_field(BubbleSpec(scale=2.0), Box3.cube(4.0, 16))
    assert f.decay_model.kind == "log_growth"
    assert f.decay_model.amplitude == 2.0
    assert f.decay_model.offset == pytest.approx(math.log(1.0))
    g = scaled_family(BubbleSpec(), 2.0, Box3.cube(4.0, 16))
    np.testing.assert_allclose(g.values, f.values)


def test_profile_checks():
    with pytest.raises(DomainError):
        BiharmonicProfile({(2, 0, 0, 0): 1.0})  # positive
    with pytest.raises(DomainError):
        BiharmonicProfile({(4, 0, 0, 0): -1.0})  # not biharmonic
    with pytest.raises(DomainError):
        BiharmonicProfile({(0, 0, 0, 1): -1.0})  # nonzero normal derivative
    with pytest.raises(DomainError):
        BiharmonicProfile({})
    with pytest.raises(DomainError):
        kernel_class_poly([0, 0, 0])
    with pytest.raises(DomainError):
        kernel_class_poly([-1, 0, 0])


def test_profile_zero_sets():
    p = kernel_class_poly([1, 0, 0], SMALL)
    zs = p.zero_set()
    assert zs == ZeroSet("subspace", (0,), 2)
    np.testing.assert_allclose(zs.distance([[0.3, 5.0, -1.0]]), [0.3])
    q = BiharmonicProfile({(0, 0, 0, 0): -1.0, (2, 0, 0, 0): -1.0}, SMALL)
    assert q.zero_set().kind == "empty"
    assert kernel_class_poly([1, 1, 1], SMALL).zero_set().dimension == 0


def test_profile_trace():
    p = kernel_class_poly([1, 2, 0], SMALL)
    x = np.array([[0.5, 0.5, 0.3]])
    assert p.trace(x)[0] == pytest.approx(-0.25 - 0.5)
    assert p.trace_field().values.shape == SMALL.shape


def test_lambda_k_and_c_k():
    p = kernel_class_poly([1, 0, 0], SMALL)
    lam = lambda_k(p, 4.0)
    # int_{-1}^{1} e^{-24 x^2} dx * 4, midpoint rule on 16 cells
    ref = 4 * math.sqrt(math.pi / 24) * math.erf(math.sqrt(24))
    assert lam == pytest.approx(ref, rel=1e-3)
    assert c_k(0.5, lam) == pytest.approx(math.log(0.5 / lam) / 6)
    assert c_k(0.5, lam, s_phi_empty=True) == 1.0
    with pytest.raises(DomainError):
        c_k(0.0, lam)


def test_fixed_point_config_validation():
    p = kernel_class_poly([1, 0, 0], SMALL)
    for kw in (dict(tol=0.0), dict(damping=0.0), dict(damping=1.5)):
        with pytest.raises(DomainError):
            FixedPointConfig(2.0, 0.5, 1.0, p, **kw)
    with pytest.raises(DomainError):
        FixedPointConfig(-2.0, 0.5, 1.0, p)
    with pytest.raises(DomainError):
        FixedPointConfig(2.0, 0.0, 1.0, p)


def test_fixed_point_solution_is_a_fixed_point():
    p = kernel_class_poly([1, 0, 0], SMALL)
    cfg = FixedPointConfig(2.0, 0.5, 1.0, p)
    res = solve_fixed_point(cfg)
    assert res.converged
    assert res.residual <= 1e-10
    assert np.max(np.abs(res.v_k.values)) <= 1.0
    Tv = T_map(res.v_k, FixedPointConfig(2.0, res.epsilon, 1.0, p))
    assert np.max(np.abs(Tv.values - res.v_k.values)) <= 1e-9
    doc = res.to_json()
    assert doc["converged"] and doc["k"] == 2.0


def test_sup_bound_and_contraction():
    p = kernel_class_poly([1, 0, 0], SMALL)
    cfg = FixedPointConfig(2.0, 0.5, 1.0, p)
    eps = admissible_epsilon(cfg)
    cfg2 = FixedPointConfig(2.0, eps, 1.0, p)
    assert sup_bound_holds(cfg2)
    assert contraction_estimate(cfg2) < 1.0


@settings(max_examples=5)
@given(st.floats(0.5, 2.0))
def test_fixed_point_iteration_count_is_finite(Q):
    p = kernel_class_poly([1, 0, 0], SMALL)
    res = solve_fixed_point(FixedPointConfig(2.0, 0.5, Q, p))
    assert res.converged and res.iterations < 500


def test_blowup_sequence_shares_epsilon():
    p = kernel_class_poly([1, 0, 0], Box3.cube(1.0, 32, cell_centered=True))
    steps = blowup_sequence(p, [2.0, 4.0])
    assert len({s.result.epsilon for s in steps}) == 1
    assert all(s.result.converged for s in steps)
    assert steps[1].sup_away < steps[0].sup_away
