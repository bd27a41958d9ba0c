import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grushin import Field, Grid, KernelQuadrature, ModelParams, NumericalError, gaussian, lp_norm, semigroup
from grushin.kernel import kernel_on_grid
from grushin.oscillator import OscillatorKernel, mehler_matrix
from grushin.semigroup import (apply_semigroup, build_propagator_bank, get_propagator, identity_approx_error,
                               spectral_second_derivative, wraparound_mass)


def _bump(grid):
    return gaussian(grid, 1.0, 0.7, 1.0, 0.3, -0.5)


def _generator_of_bump(grid):
    # Δ_G applied analytically to _bump
    def f(xs, ys):
        x, y = xs[0], ys[0]
        e = np.exp(-(x - 0.3) ** 2 / 0.98 - (y + 0.5) ** 2 / 2)
        fxx = ((x - 0.3) ** 2 / 0.49 ** 2 - 1 / 0.49) * e
        fyy = ((y + 0.5) ** 2 - 1) * e
        return 0.5 * (fxx + x * x * fyy)
    return Field.from_function(grid, f)


def test_spectral_derivative_is_exact_on_trig_modes():
    n, L = 32, 2 * math.pi
    x = np.arange(n) * (L / n)
    d2 = spectral_second_derivative(n, L / n)
    np.testing.assert_allclose(d2 @ np.sin(3 * x), -9 * np.sin(3 * x), atol=1e-11)


def test_time_zero_is_identity(params, grid):
    phi = _bump(grid)
    assert semigroup(params, grid, 0.0, phi) is phi
    out = get_propagator(params, grid).apply(0.0, phi)
    np.testing.assert_allclose(out.values, phi.values, atol=1e-13)


def test_negative_time_rejected(params, grid):
    with pytest.raises(NumericalError):
        get_propagator(params, grid).decay(-1.0)
    with pytest.raises(NumericalError):
        build_propagator_bank(params, grid, 0.0)


def test_matches_kernel_convolution(params, grid, quad):
    phi = _bump(grid)
    t = 1.0
    u = semigroup(params, grid, t, phi)
    j0 = int(np.argmin(np.abs(grid.y_nodes)))
    for i in (40, 56, 64, 80):
        k = kernel_on_grid(params, quad, grid, [grid.x_nodes[i]], t)
        ref = float((k * phi.values).sum() * grid.cell_volume)
        assert u.values[i, j0] == pytest.approx(ref, rel=1e-10)


def test_bank_matches_closed_form_mehler(params, grid):
    t = 0.5
    bank = build_propagator_bank(params, grid, t)
    inner = np.abs(grid.x_nodes) < 4.0
    for j in (0, 5, 40):
        a = bank.frequencies[j]
        ref = mehler_matrix(OscillatorKernel(a, 1, t), grid.x_nodes)
        np.testing.assert_allclose(bank.matrices[j][np.ix_(inner, inner)], ref[np.ix_(inner, inner)], atol=1e-13)


def test_bank_matches_modal_application(params, grid):
    phi = _bump(grid)
    a = apply_semigroup(build_propagator_bank(params, grid, 0.3), phi)
    b = semigroup(params, grid, 0.3, phi)
    np.testing.assert_allclose(a.values, b.values, atol=1e-14)


def test_semigroup_law_and_mass(params, grid):
    phi = _bump(grid)
    two = semigroup(params, grid, 0.3, semigroup(params, grid, 0.7, phi))
    one = semigroup(params, grid, 1.0, phi)
    assert lp_norm(two - one, 2) <= 1e-12 * lp_norm(phi, 2)
    assert one.integral() == pytest.approx(phi.integral(), rel=1e-12)


def test_self_adjoint(params, grid):
    phi, psi = _bump(grid), gaussian(grid, 1.0, 1.2, 0.6, -1.0, 1.0)
    lhs = np.sum(semigroup(params, grid, 0.4, phi).values * psi.values)
    rhs = np.sum(phi.values * semigroup(params, grid, 0.4, psi).values)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_generator_limit(params, grid):
    # ‖S(t)φ - φ‖ / t -> ‖Δ_G φ‖ as t -> 0
    target = lp_norm(_generator_of_bump(grid), 2)
    errs = identity_approx_error(params, grid, _bump(grid), [1e-3, 1e-4, 1e-5])
    ratios = [e / t / target for t, e in errs]
    assert abs(ratios[-1] - 1) < 1e-4
    assert abs(ratios[0] - 1) > abs(ratios[1] - 1) > abs(ratios[2] - 1)


@settings(max_examples=15, deadline=None)
@given(t=st.floats(1e-3, 2.0), xc=st.floats(-1.0, 1.0), yc=st.floats(-2.0, 2.0), w=st.floats(0.5, 1.5))
def test_contraction_positivity_and_mass(t, xc, yc, w):
    P, g = ModelParams(), Grid()
    phi = gaussian(g, 1.0, w, w, xc, yc)
    u = semigroup(P, g, t, phi)
    assert lp_norm(u, 2) <= lp_norm(phi, 2) * (1 + 1e-12)
    assert lp_norm(u, math.inf) <= lp_norm(phi, math.inf) * (1 + 1e-6)
    assert u.values.min() >= -1e-8 * u.values.max()
    assert u.integral() == pytest.approx(phi.integral(), rel=1e-10)


def test_wraparound_diagnostic(params, grid):
    phi = gaussian(grid, 1.0, 0.5, 0.5)
    assert wraparound_mass(params, grid, phi, 0.1) < 1e-8
    assert wraparound_mass(params, grid, phi, 20.0) > wraparound_mass(params, grid, phi, 1.0)


def test_two_dimensional_x_block_is_a_product_at_zero_frequency():
    P = ModelParams(N=2, k=1, rho=2.0, p=3.0)
    g = Grid(N=2, k=1, x_extent=6.0, x_points=24, y_extent=10.0, y_points=32)
    phi = gaussian(g, 1.0, 0.8, 1.0)
    u = semigroup(P, g, 0.5, phi)
    assert u.integral() == pytest.approx(phi.integral(), rel=1e-12)
    two = semigroup(P, g, 0.2, semigroup(P, g, 0.3, phi))
    np.testing.assert_allclose(two.values, u.values, atol=1e-13)
    # symmetric datum stays symmetric under x1 <-> x2
    np.testing.assert_allclose(u.values, np.swapaxes(u.values, 0, 1), atol=1e-13)


def test_two_dimensional_y_block_mass_and_rotation():
    P = ModelParams(N=1, k=2, rho=2.0, p=3.0)
    g = Grid(N=1, k=2, x_extent=6.0, x_points=24, y_extent=10.0, y_points=32)
    phi = gaussian(g, 1.0, 0.8, 1.0)
    u = semigroup(P, g, 0.5, phi)
    assert u.integral() == pytest.approx(phi.integral(), rel=1e-12)
    np.testing.assert_allclose(u.values, np.swapaxes(u.values, 1, 2), atol=1e-13)


def test_wrong_grid_rejected(params, grid, small_grid):
    with pytest.raises(ValueError):
        get_propagator(params, grid).apply(0.1, gaussian(small_grid))
