"""Hardware constants, link geometry, and per-arm transmittances.

Detector efficiency is folded into the channel transmittance, so the
eta values produced here are overall efficiencies (fiber times detector)
and can be used directly in all gain and yield formulas.
"""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SystemParams:
    """Fixed hardware and environment constants.

    Attributes:
        eta_d: detection efficiency of each of the measurement node's
            two (identical) single-photon detectors, in [0, 1].
        p_d: dark count probability per pulse per detector.
        e_d: misalignment error of the optical system, in [0, 0.5].
        alpha_db: fiber loss constant in dB/km.
        f_ec: error correction efficiency, >= 1.
        n_pulses: total number of pulses sent (used for finite-size
            statistics).
        m_slices: number of phase slices M; must be even so that
            pi-opposed slices exist.
    """

    eta_d: float = 0.5
    p_d: float = 1e-10
    e_d: float = 0.15
    alpha_db: float = 0.2
    f_ec: float = 1.1
    n_pulses: float = 1e12
    m_slices: int = 16

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta_d <= 1.0:
            raise ValueError(f"eta_d must be in [0, 1], got {self.eta_d}")
        if not 0.0 <= self.p_d <= 1.0:
            raise ValueError(f"p_d must be in [0, 1], got {self.p_d}")
        if not 0.0 <= self.e_d <= 0.5:
            raise ValueError(f"e_d must be in [0, 0.5], got {self.e_d}")
        if self.alpha_db < 0.0:
            raise ValueError(f"alpha_db must be >= 0, got {self.alpha_db}")
        if self.f_ec < 1.0:
            raise ValueError(f"f_ec must be >= 1, got {self.f_ec}")
        if self.n_pulses < 1:
            raise ValueError(f"n_pulses must be >= 1, got {self.n_pulses}")
        if self.m_slices < 2 or self.m_slices % 2 != 0:
            raise ValueError(
                f"m_slices must be an even integer >= 2, got {self.m_slices}"
            )


@dataclass(frozen=True)
class LinkGeometry:
    """Distances from the two users to the untrusted measurement node.

    Convention: Alice is the nearer party, so l_a <= l_b is enforced.
    """

    l_a: float
    l_b: float

    def __post_init__(self) -> None:
        if self.l_a < 0 or self.l_b < 0:
            raise ValueError("distances must be >= 0")
        if self.l_a > self.l_b:
            raise ValueError(
                f"convention requires l_a <= l_b, got l_a={self.l_a}, l_b={self.l_b}"
            )

    @property
    def total_km(self) -> float:
        return self.l_a + self.l_b


def transmittance(sys: SystemParams, distance_km: float) -> float:
    """Overall arm transmittance eta = eta_d * 10^(-alpha_db * L / 10)."""
    if distance_km < 0:
        raise ValueError("distance_km must be >= 0")
    return sys.eta_d * 10.0 ** (-sys.alpha_db * distance_km / 10.0)


def arm_transmittances(sys: SystemParams, geom: LinkGeometry) -> tuple[float, float]:
    """Per-arm overall transmittances (eta_a, eta_b), with eta_a >= eta_b."""
    if geom.l_a > geom.l_b:
        raise ValueError("geometry violates l_a <= l_b convention")
    return transmittance(sys, geom.l_a), transmittance(sys, geom.l_b)
