import pytest

from snsqkd import LinkGeometry, SystemParams, arm_transmittances, matched_params


@pytest.fixture(scope="session")
def table2_sys():
    """Simulation constants: eta_d=50%, P_d=1e-10, E_d=15%, 0.2 dB/km, f=1.1, N=1e12."""
    return SystemParams()


@pytest.fixture(scope="session")
def benchmark_geom():
    return LinkGeometry(l_a=50.0, l_b=150.0)


@pytest.fixture(scope="session")
def benchmark_etas(table2_sys, benchmark_geom):
    return arm_transmittances(table2_sys, benchmark_geom)


@pytest.fixture(scope="session")
def benchmark_params(benchmark_etas):
    eta_a, eta_b = benchmark_etas
    return matched_params(
        eta_a, eta_b, u_b=0.45, v_b=0.10, w_b=0.02,
        eps_a=0.02, eps_b=0.30, p_za=0.70, p_zb=0.70,
    )


@pytest.fixture(scope="session")
def validation_params(benchmark_etas):
    """X-heavy parameter point so tagged n=1 cells accumulate statistics."""
    eta_a, eta_b = benchmark_etas
    return matched_params(
        eta_a, eta_b, u_b=0.45, v_b=0.60, w_b=0.30,
        eps_a=0.25, eps_b=0.25, p_za=0.30, p_zb=0.30,
    )
