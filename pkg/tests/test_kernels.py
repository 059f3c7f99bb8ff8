import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracq.errors import DomainError, SingularPointError
from fracq.kernels import (KernelKind, KernelSpec, d_gamma, d_tilde_gamma, kappa_n, kappa_n_gamma, kappa_tilde_n,
                           kappa_tilde_n_gamma, neumann_kernel, neumann_scattering_kernel, poisson_kernel,
                           scattering_kernel)
from fracq.quad import integrate_radial


def _point(n, r):
    p = np.zeros(n)
    p[0] = r
    return p


@pytest.mark.parametrize("n,tol", [(1, 1e-6), (3, 1e-6), (5, 1e-4)])
def test_poisson_kernel_unit_mass(n, tol):
    spec = KernelSpec(n)
    val = integrate_radial(lambda r: poisson_kernel(spec, _point(n, r), 1.0), n).value
    assert abs(val - 1.0) <= tol


def test_kappa_3_closed_form():
    assert kappa_n(3) == pytest.approx(4 / math.pi ** 2, rel=1e-15)


@pytest.mark.parametrize("g,val", [(0.5, -1.0), (1.5, 3.0)])
def test_d_gamma_values(g, val):
    assert d_gamma(g) == pytest.approx(val, abs=1e-12)


def test_d_tilde_three_halves():
    assert d_tilde_gamma(1.5) == pytest.approx(0.5, abs=1e-12)


def test_scattering_constant_at_endpoint():
    assert kappa_n_gamma(3, 1.5) == pytest.approx(kappa_n(3), rel=1e-14)
    assert kappa_tilde_n_gamma(3, 1.5) == pytest.approx(kappa_tilde_n(3), rel=1e-14)


@given(st.sampled_from([1, 3, 5]), st.floats(0.2, 5.0), st.floats(0.05, 3.0), st.floats(0.0, 3.0))
def test_poisson_kernel_scaling(n, lam, y, r):
    spec = KernelSpec(n)
    x = _point(n, r)
    lhs = poisson_kernel(spec, lam * x, lam * y) * lam ** n
    assert lhs == pytest.approx(poisson_kernel(spec, x, y), rel=1e-12)


@given(st.floats(0.05, 3.0), st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_poisson_kernel_rotation_invariant(y, x):
    spec = KernelSpec(3)
    x = np.array(x)
    R = np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]], float)
    assert poisson_kernel(spec, R @ x, y) == pytest.approx(poisson_kernel(spec, x, y), rel=1e-14)
    assert poisson_kernel(spec, -x, y) == pytest.approx(poisson_kernel(spec, x, y), rel=1e-14)


@given(st.sampled_from([(1, 0.25), (3, 0.25), (3, 0.75), (3, 1.25), (5, 1.75)]), st.floats(0.3, 3.0))
def test_scattering_kernel_mass_is_height_power(ng, y):
    n, g = ng
    spec = KernelSpec(n, g, KernelKind.SCATTERING)
    val = integrate_radial(lambda r: scattering_kernel(spec, _point(n, r), y), n).value
    assert val == pytest.approx(y ** (n / 2 - g), rel=1e-6)


@pytest.mark.parametrize("n", [1, 3, 5])
def test_neumann_scattering_tends_to_log_kernel(n):
    x = np.full(n, 0.4)
    ref = neumann_kernel(KernelSpec(n, kind=KernelKind.NEUMANN), x, 0.5)
    errs = []
    for eps in (1e-2, 1e-3, 1e-4):
        spec = KernelSpec(n, n / 2 - eps, KernelKind.SCATTERING)
        errs.append(abs(neumann_scattering_kernel(spec, x, 0.5) - ref))
    assert errs[2] < errs[1] < errs[0]
    assert errs[2] <= 1e-3 * max(1.0, abs(ref))


def test_neumann_kernel_is_log():
    spec = KernelSpec(3, kind=KernelKind.NEUMANN)
    x = np.array([0.3, 0.0, 0.4])
    assert neumann_kernel(spec, x, 1.0) == pytest.approx(-kappa_tilde_n(3) * math.log(1.25), rel=1e-14)


def test_kernel_vectorizes():
    spec = KernelSpec(3)
    pts = np.random.default_rng(0).normal(size=(7, 3))
    vals = poisson_kernel(spec, pts, 0.7)
    assert vals.shape == (7,)
    assert vals[2] == pytest.approx(poisson_kernel(spec, pts[2], 0.7))


@pytest.mark.parametrize("kw", [dict(n=2), dict(n=3, gamma=1.0, kind="scattering"),
                                dict(n=3, gamma=2.0), dict(n=3, gamma=0.5),
                                dict(n=3, gamma=1.5, kind="scattering")])
def test_invalid_specs(kw):
    with pytest.raises(DomainError):
        KernelSpec(**kw)


def test_singular_corner_and_negative_height():
    spec = KernelSpec(3)
    with pytest.raises(SingularPointError):
        poisson_kernel(spec, np.zeros(3), 0.0)
    with pytest.raises(DomainError):
        poisson_kernel(spec, np.ones(3), -1.0)
    with pytest.raises(DomainError):
        d_gamma(1.0)


def test_boundary_limit_vanishes_off_origin():
    spec = KernelSpec(3)
    assert poisson_kernel(spec, np.array([0.5, 0, 0]), 0.0) == 0.0
