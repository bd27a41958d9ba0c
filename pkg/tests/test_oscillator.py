import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from grushin import NumericalError
from grushin.oscillator import OscillatorKernel, log_sinh, mehler_coefficients, mehler_matrix, mehler_point

# high-precision reference values (mpmath, 30 digits, direct sinh/cosh formula)
REF_A1_ORIGIN_T1 = 0.36800519870756081
REF_A2_T1 = 0.17340317741017438  # x=0.5, x0=-0.4


def test_zero_frequency_is_gaussian():
    v = mehler_point(OscillatorKernel(1e-12, 1, 1.0), 1.0, 0.0)
    assert v == pytest.approx(math.exp(-0.5) / math.sqrt(2 * math.pi), rel=1e-14)


def test_reference_values():
    assert mehler_point(OscillatorKernel(1.0, 1, 1.0), 0.0, 0.0) == pytest.approx(REF_A1_ORIGIN_T1, rel=1e-14)
    assert mehler_point(OscillatorKernel(2.0, 1, 1.0), 0.5, -0.4) == pytest.approx(REF_A2_T1, rel=1e-14)


def test_large_at_stays_finite():
    # large-at limit of the log form
    a, x, x0 = 700.0, 0.3, -0.2
    v = mehler_point(OscillatorKernel(a, 1, 1.0), x, x0)
    log_ref = 0.5 * (math.log(a / math.pi) - a) - 0.5 * a * ((x - x0) ** 2 + 2 * x * x0)
    assert v > 0 and math.log(v) == pytest.approx(log_ref, rel=1e-12)
    assert mehler_point(OscillatorKernel(1e6, 1, 1.0), x, x0) == 0.0


def test_log_sinh_matches_numpy_and_survives_overflow():
    z = np.array([1e-3, 0.5, 3.0, 30.0])
    np.testing.assert_allclose(log_sinh(z), np.log(np.sinh(z)), rtol=1e-13)
    assert log_sinh(2000.0) == pytest.approx(2000.0 - math.log(2.0))


def test_small_at_branch_is_continuous():
    t = 0.7
    lo = mehler_coefficients(np.array([0.999e-6 / t]), t)
    hi = mehler_coefficients(np.array([1.001e-6 / t]), t)
    for a, b in zip(lo, hi):
        assert a[0] == pytest.approx(b[0], rel=1e-8, abs=1e-14)


def test_rejects_non_positive_time():
    with pytest.raises(NumericalError):
        OscillatorKernel(1.0, 1, 0.0)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0.0, 5.0), x0=st.floats(-2, 2), t=st.floats(0.05, 3.0))
def test_mass_equals_sech_power(a, x0, t):
    # ∫ L dx = sech(at)^{1/2} exp(-a tanh(at) x0²/2)
    kern = OscillatorKernel(a, 1, t)
    mass, _ = integrate.quad(lambda x: mehler_point(kern, x, x0), -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12)
    exact = math.exp(-0.5 * a * math.tanh(a * t) * x0 * x0) / math.sqrt(math.cosh(a * t))
    assert mass == pytest.approx(exact, rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0.0, 4.0), x=st.floats(-2, 2), x0=st.floats(-2, 2), t=st.floats(0.05, 3.0))
def test_symmetric_in_x_and_x0(a, x, x0, t):
    kern = OscillatorKernel(a, 1, t)
    assert mehler_point(kern, x, x0) == mehler_point(kern, x0, x)


def test_chapman_kolmogorov():
    a, s, t, x, x0 = 2.0, 0.3, 0.7, 0.5, -0.4
    k1, k2, k3 = OscillatorKernel(a, 1, s), OscillatorKernel(a, 1, t), OscillatorKernel(a, 1, s + t)
    lhs, _ = integrate.quad(lambda z: mehler_point(k2, x, z) * mehler_point(k1, z, x0), -np.inf, np.inf,
                            epsabs=1e-14, epsrel=1e-13)
    assert lhs == pytest.approx(mehler_point(k3, x, x0), rel=1e-11)


def test_product_structure_in_several_dimensions():
    kern = OscillatorKernel(1.3, 2, 0.4)
    one = OscillatorKernel(1.3, 1, 0.4)
    x, x0 = np.array([0.2, -0.7]), np.array([1.0, 0.3])
    expect = mehler_point(one, x[0], x0[0]) * mehler_point(one, x[1], x0[1])
    assert mehler_point(kern, x, x0) == pytest.approx(expect, rel=1e-14)


def test_mehler_matrix_shapes_and_symmetry():
    nodes = np.linspace(-4, 4, 16, endpoint=False)
    m = mehler_matrix(OscillatorKernel(1.0, 1, 0.5), nodes)
    assert m.shape == (16, 16)
    np.testing.assert_array_equal(m, m.T)
    full = mehler_matrix(OscillatorKernel(1.0, 2, 0.5), nodes, full=True)
    assert full.shape == (256, 256)
    np.testing.assert_allclose(full, np.kron(m, m))
