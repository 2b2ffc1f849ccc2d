"""Key-rate assembly.

R = P_za P_zb { [eps_a (1 - eps_b) e^{-u_a} u_a
                 + eps_b (1 - eps_a) e^{-u_b} u_b] Y1^L [1 - H(e1^U)]
                - Q_z f H(E_z) }

built from the Z-window observables and the decoy-state bounds, the
latter fed by phase-averaged X-window observables and optionally
wrapped with finite-size deviations.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

from .channel import LinkGeometry, SystemParams, arm_transmittances
from .decoy import (
    ConstraintReport,
    DecoySettings,
    FluctuationPolicy,
    ObservedRates,
    apply_fluctuations,
    decoy_sample_sizes,
    e1_upper,
    matched_decoys,
    validate_constraints,
    y1_lower,
)
from .xwindow import XWindowObservables, averaged_observables
from .zwindow import ZWindowObservables, ZWindowParams, z_observables


class ConstraintError(ValueError):
    """Raised when protocol parameters violate the decoy-bound constraints."""


@dataclass(frozen=True)
class ProtocolParams:
    """Optimizable protocol knobs."""

    p_za: float
    p_zb: float
    eps_a: float
    eps_b: float
    u_a: float
    u_b: float
    decoys: DecoySettings
    m_slices: Optional[int] = None

    def __post_init__(self) -> None:
        for name in ("p_za", "p_zb", "eps_a", "eps_b"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.u_a < 0 or self.u_b < 0:
            raise ValueError("signal intensities must be >= 0")

    def z_params(self) -> ZWindowParams:
        return ZWindowParams(
            u_a=self.u_a, u_b=self.u_b, eps_a=self.eps_a, eps_b=self.eps_b
        )

    def effective_m(self, sys: SystemParams) -> int:
        return self.m_slices if self.m_slices is not None else sys.m_slices


@dataclass(frozen=True)
class RateBreakdown:
    """Final rate plus every intermediate observable of the pipeline."""

    rate: float
    rate_raw: float
    y1_low: float
    e1_up: Optional[float]
    e1_clamped: bool
    z_gain: float
    z_qber: float
    x_mu1: XWindowObservables
    x_mu2: XWindowObservables
    y_0: float
    constraints: ConstraintReport
    fluctuation_applied: bool
    m_slices: int

    def to_dict(self) -> dict:
        return asdict(self)


def binary_entropy(x: float) -> float:
    """H(x) = -x log2 x - (1 - x) log2 (1 - x), with H(0) = H(1) = 0."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy argument must be in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def matched_params(
    eta_a: float,
    eta_b: float,
    u_b: float,
    v_b: float,
    w_b: float,
    eps_a: float,
    eps_b: float,
    p_za: float,
    p_zb: float,
    m_slices: Optional[int] = None,
) -> ProtocolParams:
    """Protocol parameters with intensity matching on every pair.

    Alice's intensities are scaled by k1 = eta_b / eta_a so both arms
    arrive at the beam splitter with equal intensity.
    """
    if not 0.0 < eta_a <= 1.0 or not 0.0 < eta_b <= 1.0:
        raise ValueError("transmittances must be in (0, 1]")
    k1 = eta_b / eta_a
    return ProtocolParams(
        p_za=p_za,
        p_zb=p_zb,
        eps_a=eps_a,
        eps_b=eps_b,
        u_a=k1 * u_b,
        u_b=u_b,
        decoys=matched_decoys(v_b=v_b, w_b=w_b, k1=k1),
        m_slices=m_slices,
    )


def key_rate_from_transmittances(
    sys: SystemParams,
    eta_a: float,
    eta_b: float,
    params: ProtocolParams,
    policy: FluctuationPolicy = FluctuationPolicy.disabled(),
) -> RateBreakdown:
    """Full analytic pipeline at given per-arm transmittances."""
    report = validate_constraints(params.decoys, params.u_a, params.u_b)
    if not report.ok:
        raise ConstraintError("; ".join(report.violations))
    m = params.effective_m(sys)
    d = params.decoys

    x_mu1 = averaged_observables(d.w_a, d.w_b, eta_a, eta_b, sys.p_d, sys.e_d, m)
    x_mu2 = averaged_observables(d.v_a, d.v_b, eta_a, eta_b, sys.p_d, sys.e_d, m)
    y_0 = 1.0 - (1.0 - sys.p_d) ** 2

    rates = ObservedRates(
        q_mu1=x_mu1.gain,
        q_mu2=x_mu2.gain,
        qe_mu1=x_mu1.gain * x_mu1.qber,
        y_0=y_0,
    )
    if policy.enabled:
        sizes = decoy_sample_sizes(sys.n_pulses, params.p_za, params.p_zb, m)
        rates = apply_fluctuations(rates, sizes, policy)

    y1 = y1_lower(d, rates)
    z = z_observables(params.z_params(), eta_a, eta_b, sys.p_d)

    correction = z.gain * sys.f_ec * binary_entropy(z.qber)
    prefactor = params.eps_a * (1.0 - params.eps_b) * math.exp(
        -params.u_a
    ) * params.u_a + params.eps_b * (1.0 - params.eps_a) * math.exp(
        -params.u_b
    ) * params.u_b

    if y1 > 0.0:
        e1, clamped = e1_upper(d, rates, y1)
        signal = prefactor * y1 * (1.0 - binary_entropy(e1))
    else:
        # Fluctuations swallowed the single-photon signal entirely.
        e1, clamped = None, False
        signal = 0.0

    raw = params.p_za * params.p_zb * (signal - correction)
    return RateBreakdown(
        rate=max(0.0, raw),
        rate_raw=raw,
        y1_low=y1,
        e1_up=e1,
        e1_clamped=clamped,
        z_gain=z.gain,
        z_qber=z.qber,
        x_mu1=x_mu1,
        x_mu2=x_mu2,
        y_0=y_0,
        constraints=report,
        fluctuation_applied=policy.enabled,
        m_slices=m,
    )


def key_rate(
    sys: SystemParams,
    geom: LinkGeometry,
    params: ProtocolParams,
    policy: FluctuationPolicy = FluctuationPolicy.disabled(),
) -> RateBreakdown:
    """Key rate per pulse at a given link geometry."""
    eta_a, eta_b = arm_transmittances(sys, geom)
    return key_rate_from_transmittances(sys, eta_a, eta_b, params, policy)
