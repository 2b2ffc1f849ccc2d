"""Key-rate analysis for sending-or-not-sending twin-field QKD over asymmetric channels."""

from .channel import LinkGeometry, SystemParams, arm_transmittances, transmittance
from .decoy import (
    DecoySettings,
    FluctuationPolicy,
    ObservedRates,
    apply_fluctuations,
    e1_upper,
    validate_constraints,
    y1_lower,
)
from .keyrate import (
    ProtocolParams,
    RateBreakdown,
    binary_entropy,
    key_rate,
    key_rate_from_transmittances,
    matched_params,
)
from .montecarlo import (
    FixedPhase,
    PulseTally,
    PulseTrialConfig,
    simulate,
    single_photon_statistics,
)
from .optimizer import OptimizationResult, OptimizationSpec, optimize, symmetric_baseline
from .photon_stats import (
    IntensityPair,
    effective_gain_qn,
    equivalent_yield_yn,
    poisson_mixture_pn,
)
from .xwindow import XWindowObservables, averaged_observables, gain_fixed_phase, system_error
from .zwindow import ZWindowObservables, ZWindowParams, z_gain_case, z_observables

__version__ = "0.1.0"

__all__ = [
    "DecoySettings",
    "FixedPhase",
    "FluctuationPolicy",
    "IntensityPair",
    "LinkGeometry",
    "ObservedRates",
    "OptimizationResult",
    "OptimizationSpec",
    "ProtocolParams",
    "PulseTally",
    "PulseTrialConfig",
    "RateBreakdown",
    "SystemParams",
    "XWindowObservables",
    "ZWindowObservables",
    "ZWindowParams",
    "apply_fluctuations",
    "arm_transmittances",
    "averaged_observables",
    "binary_entropy",
    "e1_upper",
    "effective_gain_qn",
    "equivalent_yield_yn",
    "gain_fixed_phase",
    "key_rate",
    "key_rate_from_transmittances",
    "matched_params",
    "optimize",
    "poisson_mixture_pn",
    "simulate",
    "single_photon_statistics",
    "symmetric_baseline",
    "system_error",
    "transmittance",
    "validate_constraints",
    "y1_lower",
    "z_gain_case",
    "z_observables",
]
