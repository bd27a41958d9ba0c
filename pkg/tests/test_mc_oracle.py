import numpy as np
import pytest

from grushin import KernelQuadrature, McConfig, ModelParams, simulate_paths
from grushin.mc_oracle import PathSample, density_compare, exact_moments, moments


@pytest.fixture(scope="module")
def sample():
    return simulate_paths(ModelParams(), McConfig(paths=100_000, dt=5e-3, seed=7), 1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        McConfig(paths=10)
    with pytest.raises(ValueError):
        McConfig(dt=0.0)
    with pytest.raises(ValueError):
        simulate_paths(ModelParams(), McConfig(paths=1000, dt=0.1), 1.0)


def test_exact_moments():
    ex = exact_moments(ModelParams(N=2, k=3, rho=2.0, p=5.0), [1.0, 1.0], 0.5)
    assert ex["second_moment_x"] == pytest.approx(3.0)
    assert ex["second_moment_y"] == pytest.approx(3 * (2 * 0.5 + 2 * 0.25 / 2))


def test_moments_within_standard_errors(sample):
    m = moments(sample)
    ex = exact_moments(ModelParams(), [1.0], 1.0)
    assert abs(m["second_moment_x"] - ex["second_moment_x"]) < 4 * m["second_moment_x_se"]
    assert abs(m["second_moment_y"] - ex["second_moment_y"]) < 4 * m["second_moment_y_se"]
    assert abs(m["mean_x0"] - 1.0) < 4 * m["mean_x0_se"]
    assert abs(m["mean_y0"]) < 4 * m["mean_y0_se"]


def test_thread_count_does_not_change_samples():
    P = ModelParams()
    a = simulate_paths(P, McConfig(paths=140_000, dt=0.01, seed=3, threads=1), 1.0)
    b = simulate_paths(P, McConfig(paths=140_000, dt=0.01, seed=3, threads=3), 1.0)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.Y, b.Y)
    c = simulate_paths(P, McConfig(paths=140_000, dt=0.01, seed=4, threads=1), 1.0)
    assert not np.array_equal(a.Y, c.Y)


def test_env_thread_fallback(monkeypatch):
    monkeypatch.setenv("GRUSHIN_THREADS", "2")
    s = simulate_paths(ModelParams(), McConfig(paths=2000, dt=0.01, seed=1), 1.0)
    assert s.X.shape == (2000, 1)


def test_histogram_distance_shrinks_with_paths(sample):
    P, q = ModelParams(), KernelQuadrature()
    cfg = McConfig(paths=100_000, dt=5e-3, seed=7)
    full = density_compare(P, cfg, q, 1.0, bins=32, sample=sample)
    quarter = PathSample(sample.X[:25_000], sample.Y[:25_000], 1.0)
    part = density_compare(P, cfg, q, 1.0, bins=32, sample=quarter)
    assert full["coverage"] > 0.999
    assert full["kernel_mass_in_box"] == pytest.approx(1.0, abs=1e-3)
    assert full["l1_distance"] < part["l1_distance"]
    assert full["l1_distance"] < 0.05


def test_histogram_requires_one_dimensional_blocks():
    P = ModelParams(N=2, k=1, rho=2.0, p=3.0)
    with pytest.raises(ValueError):
        density_compare(P, McConfig(paths=1000, x0=(1.0, 0.0)), KernelQuadrature(), 1.0)


def test_higher_dimensional_paths():
    P = ModelParams(N=2, k=2, rho=2.0, p=4.0)
    s = simulate_paths(P, McConfig(paths=40_000, dt=0.01, seed=11, x0=(1.0, 0.0)), 1.0)
    m = moments(s)
    ex = exact_moments(P, [1.0, 0.0], 1.0)
    assert abs(m["second_moment_y"] - ex["second_moment_y"]) < 4 * m["second_moment_y_se"]
