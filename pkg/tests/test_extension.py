import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from fracq.errors import DomainError
from fracq.extension import (DirichletExtension, HalfSpaceField, NeumannPotential, Window, biharmonic_residual,
                             check_relation, dirichlet_extend, fraclap_constant, neumann_extend,
                             neumann_trace_L32, probe_nodes, smoothstep, spectral_fraclap)
from fracq.fields import Box3, GridField3


class ExactBubbleExtension:
    """Closed-form Poisson extension of log(2 / (1 + |x|^2))."""

    def __init__(self, spacing):
        self.spacing = spacing

    def __call__(self, x, y):
        x = np.atleast_2d(x)
        q = (1 + abs(y)) ** 2 + np.sum(x * x, axis=1)
        return math.log(2) - np.log(q) + 2 * abs(y) / q


def _gauss_field(box, a=1.0):
    return GridField3.from_function(lambda p: np.exp(-a * np.sum(p * p, axis=1)), box)


@given(st.floats(-1, 2))
def test_smoothstep_range(t):
    v = float(smoothstep(t))
    assert 0.0 <= v <= 1.0
    if t <= 0:
        assert v == 0.0
    if t >= 1:
        assert v == 1.0


def test_smoothstep_monotone_and_symmetric():
    t = np.linspace(0, 1, 201)
    s = smoothstep(t)
    assert np.all(np.diff(s) >= 0)
    np.testing.assert_allclose(s + s[::-1], 1.0, atol=1e-12)


def test_window_profile():
    w = Window(1.0, 2.0)
    assert float(w.radial(0.5)) == 1.0
    assert float(w.radial(2.5)) == 0.0
    assert 0 < float(w.radial(1.5)) < 1


def test_half_space_field_validation():
    with pytest.raises(DomainError):
        HalfSpaceField(np.zeros((2, 3)), np.zeros(2))
    with pytest.raises(DomainError):
        HalfSpaceField(np.array([[0, 0, 0, -1.0]]), np.zeros(1))
    a = HalfSpaceField(np.zeros((1, 4)), np.ones(1))
    assert (a + a).values[0] == 2.0


def test_fraclap_constant():
    assert fraclap_constant(3, 1.5) == pytest.approx(12 / math.pi ** 2, rel=1e-14)
    assert fraclap_constant(3, 0.5) < 0
    assert fraclap_constant(3, 1.0) == 0.0


@given(st.lists(st.floats(-1.5, 1.5), min_size=3, max_size=3))
def test_trace_of_exact_bubble_extension(x):
    x = np.array([x])
    tr = neumann_trace_L32(ExactBubbleExtension(0.05), x)
    ref = 2 * (2 / (1 + np.sum(x * x))) ** 3
    assert tr.value[0] == pytest.approx(ref, rel=1e-4)


def test_trace_of_cubic_in_y():
    U = lambda x, y: np.full(len(np.atleast_2d(x)), abs(y) ** 3) + np.sum(np.atleast_2d(x) ** 2, axis=1)
    tr = neumann_trace_L32(U, np.zeros((2, 3)), h=0.01)
    np.testing.assert_allclose(tr.value, 3.0, rtol=1e-8)
    with pytest.raises(DomainError):
        neumann_trace_L32(U, np.zeros((1, 3)))


def test_biharmonic_residual_exact_bubble():
    val, scale = biharmonic_residual(ExactBubbleExtension(1 / 16), np.array([0.0, 0.0, 0.0, 1.0]))
    assert abs(val) <= 1e-3 * scale


def test_biharmonic_residual_polynomial_and_reach():
    U = lambda x, y: np.sum(np.atleast_2d(x) ** 2, axis=1) * y * y
    val, _ = biharmonic_residual(U, np.array([0.3, 0.1, 0.0, 1.0]), h=0.1)
    assert abs(val - 24.0) <= 1e-6  # Delta^2 (|x|^2 y^2) = 24
    with pytest.raises(DomainError):
        biharmonic_residual(U, np.array([0.0, 0.0, 0.0, 0.1]), h=0.1)


def test_dirichlet_extension_gaussian_matches_quadrature():
    box = Box3.cube(5.0, 32)
    u = _gauss_field(box)
    U = DirichletExtension(u)
    K = lambda r, y: 4 / math.pi ** 2 * y ** 3 / (y * y + r * r) ** 3
    for y in (0.5, 1.0):
        ref = integrate.quad(lambda r: K(r, y) * math.exp(-r * r) * 4 * math.pi * r * r, 0, 10)[0]
        assert U(np.zeros((1, 3)), y)[0] == pytest.approx(ref, rel=1e-4)
    node = box.points()[100:101]
    assert U(node, 0.0)[0] == pytest.approx(u.values.ravel()[100])


def test_dirichlet_extend_sampler_and_isotropy():
    box = Box3.cube(5.0, 32)
    pts = np.array([[0, 0, 0, 0.5], [0, 0, 0, 1.0]])
    f = dirichlet_extend(_gauss_field(box), pts)
    assert f.provenance == "dirichlet_extension"
    assert f.values[0] > f.values[1] > 0
    aniso = Box3((0, 0, 0), (1.0, 2.0, 1.0), (16, 16, 16))
    with pytest.raises(DomainError):
        DirichletExtension(_gauss_field(aniso))


def test_neumann_potential_far_field():
    box = Box3.cube(4.0, 32)
    w = _gauss_field(box)
    mass = w.integral()
    f = neumann_extend(w, np.array([[0, 0, 0, 40.0]]))
    assert f.values[0] == pytest.approx(mass / (2 * math.pi ** 2) * math.log(1 / 40.0), rel=1e-3)


def test_spectral_fraclap_gaussian():
    box = Box3.cube(8.0, 64)
    u = GridField3.from_function(lambda p: np.exp(-0.5 * np.sum(p * p, axis=1)), box)
    lap = spectral_fraclap(u, 1.5)
    assert lap.at([0, 0, 0]) == pytest.approx(32 * math.pi / (2 * math.pi) ** 1.5, rel=1e-7)
    one = spectral_fraclap(u, 1.0)
    pts = box.points()
    r2 = np.sum(pts * pts, axis=1)
    np.testing.assert_allclose(one.values.ravel(), (3 - r2) * np.exp(-r2 / 2), atol=1e-8)


def test_spectral_fraclap_rejects_bad_power():
    with pytest.raises(DomainError):
        spectral_fraclap(_gauss_field(Box3.cube(2.0, 8)), 0.0)


def test_probe_nodes_radius():
    box = Box3.cube(2.0, 16)
    p = probe_nodes(box, 1.0)
    assert len(p) > 0 and np.all(np.linalg.norm(p, axis=1) <= 1.0 + 1e-12)


def test_check_relation_gaussian_coarse():
    rep = check_relation(_gauss_field(Box3.cube(8.0, 64), 0.5), 2.0)
    assert rep.max_rel <= 2e-2
    assert rep.flagged == 0
    assert rep.trace.shape == rep.spectral.shape
