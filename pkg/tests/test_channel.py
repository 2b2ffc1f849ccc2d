import numpy as np
import pytest

from snsqkd import LinkGeometry, SystemParams, arm_transmittances, transmittance


def test_zero_length_fiber_gives_detector_efficiency():
    sys = SystemParams(eta_d=0.5, alpha_db=0.2)
    assert transmittance(sys, 0.0) == 0.5


def test_exact_powers_of_ten():
    assert transmittance(SystemParams(eta_d=0.5, alpha_db=0.2), 50.0) == pytest.approx(
        0.05, rel=1e-15
    )
    assert transmittance(SystemParams(eta_d=1.0, alpha_db=0.2), 100.0) == pytest.approx(
        0.01, rel=1e-15
    )


def test_arm_transmittances_symmetric_degenerate():
    sys = SystemParams()
    assert arm_transmittances(sys, LinkGeometry(0.0, 0.0)) == (0.5, 0.5)


def test_arm_transmittances_benchmark_point():
    # Hand evaluation: 0.5 * 10^-1 and 0.5 * 10^-3.
    eta_a, eta_b = arm_transmittances(SystemParams(), LinkGeometry(50.0, 150.0))
    assert eta_a == pytest.approx(0.05, rel=1e-14)
    assert eta_b == pytest.approx(0.0005, rel=1e-14)


def test_geometry_convention_violation_rejected():
    with pytest.raises(ValueError):
        LinkGeometry(100.0, 50.0)


def test_transmittance_monotone_in_distance_and_efficiency():
    rng = np.random.default_rng(0)
    for _ in range(200):
        eta_d = rng.uniform(0.05, 1.0)
        sys = SystemParams(eta_d=eta_d)
        d1, d2 = sorted(rng.uniform(0.0, 400.0, 2))
        if d1 == d2:
            continue
        assert transmittance(sys, d1) > transmittance(sys, d2)
        smaller = SystemParams(eta_d=eta_d * 0.5)
        assert transmittance(smaller, d1) < transmittance(sys, d1)


def test_negative_distance_rejected():
    with pytest.raises(ValueError):
        transmittance(SystemParams(), -1.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"eta_d": 1.5},
        {"p_d": -0.1},
        {"e_d": 0.6},
        {"alpha_db": -1.0},
        {"f_ec": 0.9},
        {"n_pulses": 0},
        {"m_slices": 3},
        {"m_slices": 0},
    ],
)
def test_invalid_system_params_rejected(kwargs):
    with pytest.raises(ValueError):
        SystemParams(**kwargs)
