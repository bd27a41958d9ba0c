import pytest

from grushin import Grid, KernelQuadrature, ModelParams


@pytest.fixture(scope="session")
def params():
    return ModelParams(N=1, k=1, rho=2.0, p=2.0)


@pytest.fixture(scope="session")
def grid():
    return Grid()


@pytest.fixture(scope="session")
def small_grid():
    return Grid(x_extent=8.0, x_points=32, y_extent=12.0, y_points=64)


@pytest.fixture(scope="session")
def quad():
    return KernelQuadrature()


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(RESULTS):
        title, ok, detail = RESULTS[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d} {title}: {detail}")
