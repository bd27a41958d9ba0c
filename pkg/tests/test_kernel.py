import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from grushin import DomainTooSmallError, Grid, KernelQuadrature, ModelParams, kernel_mass, kernel_point
from grushin.kernel import (adapted_grid, decay_exponent_fit, kernel_lq_norm, kernel_on_grid, kernel_values,
                            predicted_decay_exponent, y_marginal)

# 25-30 digit mpmath quadratures of the defining ξ-integral
REFERENCES = [
    # (N, k, x, x0, y, t, value)
    (1, 1, [0.5], [-0.3], [0.7], 1.0, 0.064145726796478837),
    (1, 1, [0.0], [0.0], [0.0], 1.0, 0.48795709971383934),
    (1, 1, [1.0], [1.0], [0.5], 0.5, 0.24322115382786502),
    (1, 1, [0.2], [1.5], [-1.0], 2.0, 0.038840507056237333),
    (1, 1, [0.0], [0.0], [0.0], 0.1, 15.430558355456283),
    (1, 2, [0.4], [-0.2], [0.3, 0.4], 1.0, 0.12731081680402415),
    (1, 2, [1.0], [0.5], [1.3, 0.0], 0.6, 0.017070453670407682),
    (2, 1, [0.3, -0.2], [0.5, 0.1], [0.4], 0.8, 0.09828143965742339),
]


@pytest.mark.parametrize("N,k,x,x0,y,t,ref", REFERENCES)
def test_matches_high_precision_reference(quad, N, k, x, x0, y, t, ref):
    P = ModelParams(N=N, k=k, rho=2.0, p=float(N + 2 * k))
    assert kernel_point(P, quad, x, x0, y, t) == pytest.approx(ref, rel=1e-12)


def test_vectorised_matches_pointwise(params, quad):
    xs = np.array([[-1.0], [0.0], [0.8]])
    ys = np.array([0.0, 0.4, 1.1])
    block = kernel_values(params, quad, xs, [0.3], ys, 0.9)
    for i, x in enumerate(xs[:, 0]):
        for j, y in enumerate(ys):
            assert block[i, j] == pytest.approx(kernel_point(params, quad, [x], [0.3], [y], 0.9), rel=1e-13)


@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("x0", [0.0, 1.5])
def test_unit_mass(params, quad, t, x0):
    assert kernel_mass(params, quad, None, [x0], t) == pytest.approx(1.0, abs=1e-7)


def test_unit_mass_two_dimensional_x_block(quad):
    P = ModelParams(N=2, k=1, rho=2.0, p=3.0)
    g = adapted_grid(P, 0.5, [1.0, -1.0], x_points=64, y_points=128)
    assert kernel_mass(P, quad, g, [1.0, -1.0], 0.5) == pytest.approx(1.0, abs=1e-9)


def test_y_marginal_is_gaussian(params, quad):
    x, x0, t = 0.6, -0.4, 0.8
    val, _ = integrate.quad(lambda y: kernel_point(params, quad, [x], [x0], [y], t), -np.inf, np.inf,
                            epsabs=1e-12, epsrel=1e-10, limit=200)
    assert val == pytest.approx(float(y_marginal(params, [x], [x0], t)[0]), rel=1e-8)


@settings(max_examples=40, deadline=None)
@given(x=st.floats(-1.5, 1.5), x0=st.floats(-1.5, 1.5), y=st.floats(-1.0, 1.0), t=st.floats(0.25, 4.0))
def test_symmetries(x, x0, y, t):
    P, q = ModelParams(), KernelQuadrature()
    ref = kernel_point(P, q, [x], [x0], [y], t)
    assert ref > 0
    assert kernel_point(P, q, [x0], [x], [y], t) == pytest.approx(ref, rel=1e-12)
    assert kernel_point(P, q, [x], [x0], [-y], t) == pytest.approx(ref, rel=1e-12)
    assert kernel_point(P, q, [-x], [-x0], [y], t) == pytest.approx(ref, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(x=st.floats(-1.5, 1.5), x0=st.floats(-1.5, 1.5), y=st.floats(-1.0, 1.0), t=st.floats(0.25, 4.0),
       lam=st.floats(0.5, 2.0))
def test_dilation_law(x, x0, y, t, lam):
    P, q = ModelParams(), KernelQuadrature()
    lhs = kernel_point(P, q, [lam * x], [lam * x0], [lam * lam * y], lam * lam * t)
    rhs = lam ** (-P.Q) * kernel_point(P, q, [x], [x0], [y], t)
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_on_grid_matches_pointwise(params, quad, small_grid):
    vals = kernel_on_grid(params, quad, small_grid, [0.2], 1.0)
    i, j = 17, 40
    x, y = small_grid.x_nodes[i], small_grid.y_nodes[j]
    assert vals[i, j] == pytest.approx(kernel_point(params, quad, [x], [0.2], [y], 1.0), rel=1e-12)


def test_small_box_is_rejected(params, quad):
    with pytest.raises(DomainTooSmallError):
        kernel_mass(params, quad, Grid(x_extent=1.0, x_points=32, y_extent=1.0, y_points=32), [0.0], 1.0)


@pytest.mark.parametrize("q,expected", [(1.0, 0.0), (2.0, -0.75), (math.inf, -1.5)])
def test_predicted_exponents(params, q, expected):
    assert predicted_decay_exponent(params, q) == pytest.approx(expected)


def test_lq_norm_scaling_on_scaled_grid(params, quad):
    base = adapted_grid(params, 1.0, 0.0, x_points=64, y_points=128)
    n1 = kernel_lq_norm(params, quad, base, [0.0], 1.0, 2.0)
    n4 = kernel_lq_norm(params, quad, base.scaled(4.0), [0.0], 4.0, 2.0)
    assert n4 / n1 == pytest.approx(4.0 ** -0.75, rel=1e-10)


def test_decay_fit_recovers_exponent(params, quad):
    slope = decay_exponent_fit(params, quad, None, [0.0], math.inf, [0.5, 1.0, 2.0, 4.0])
    assert slope == pytest.approx(-1.5, abs=1e-6)


def test_quadrature_validation():
    with pytest.raises(ValueError):
        KernelQuadrature(xi_points=8)
    with pytest.raises(ValueError):
        KernelQuadrature(xi_cutoff=-1.0)
    r, w = KernelQuadrature().nodes(1, 1.0)
    assert r.min() > 0 and r.max() < 80.0
    assert w.sum() == pytest.approx(80.0)
