"""Decoy-state bounds valid under channel asymmetry.

Two decoy pairs (w_a, w_b) and (v_a, v_b) with totals mu1 < mu2 and
ratios k1 <= k2 bound the single-photon yield from below and the
single-photon error rate from above.  The standard-deviation method
wraps each observed rate with its worst-case Gaussian deviation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.stats import norm

from .photon_stats import equivalent_yield_yn, poisson_pn, truncation_cutoff


class DegenerateBoundError(ValueError):
    """Raised when the decoy configuration cannot produce a bound."""


@dataclass(frozen=True)
class DecoySettings:
    """The two non-vacuum decoy intensity pairs; vacuum o = 0 is implicit.

    The w pair forms mu1 = w_a + w_b and the v pair mu2 = v_a + v_b.
    """

    v_a: float
    v_b: float
    w_a: float
    w_b: float

    def __post_init__(self) -> None:
        for name in ("v_a", "v_b", "w_a", "w_b"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.v_b == 0 or self.w_b == 0:
            raise ValueError("v_b and w_b must be > 0 (intensity ratios required)")

    @property
    def mu1(self) -> float:
        return self.w_a + self.w_b

    @property
    def mu2(self) -> float:
        return self.v_a + self.v_b

    @property
    def k1(self) -> float:
        return self.w_a / self.w_b

    @property
    def k2(self) -> float:
        return self.v_a / self.v_b


@dataclass(frozen=True)
class ObservedRates:
    """Measured (or modeled) X-window rates feeding the bounds."""

    q_mu1: float
    q_mu2: float
    qe_mu1: float
    y_0: float

    def __post_init__(self) -> None:
        for name in ("q_mu1", "q_mu2", "qe_mu1", "y_0"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.qe_mu1 > self.q_mu1:
            raise ValueError("qe_mu1 cannot exceed q_mu1")


@dataclass(frozen=True)
class FluctuationPolicy:
    """Standard-deviation finite-size wrapping at a target failure probability."""

    enabled: bool = True
    failure_prob: float = 1e-7

    def __post_init__(self) -> None:
        if not 0.0 < self.failure_prob < 1.0:
            raise ValueError("failure_prob must be in (0, 1)")

    @property
    def n_sigma(self) -> float:
        """Two-sided Gaussian quantile for the failure probability."""
        return float(norm.isf(self.failure_prob / 2.0))

    @staticmethod
    def disabled() -> "FluctuationPolicy":
        return FluctuationPolicy(enabled=False)


@dataclass(frozen=True)
class SampleSizes:
    """Expected trial counts behind each observed X-window rate."""

    n_mu1: float
    n_mu2: float
    n_vacuum: float

    def __post_init__(self) -> None:
        for name in ("n_mu1", "n_mu2", "n_vacuum"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass(frozen=True)
class ConstraintReport:
    ok: bool
    violations: tuple[str, ...]


def validate_constraints(
    settings: DecoySettings, u_a: float, u_b: float
) -> ConstraintReport:
    """Check the asymmetric decoy-bound preconditions.

    Requires k1 <= k2, signal ratio u_a / u_b >= k1, and mu1 < mu2.
    """
    violations = []
    if settings.k1 > settings.k2 * (1.0 + 1e-12):
        violations.append(
            f"k1 <= k2 violated: k1={settings.k1:.6g}, k2={settings.k2:.6g}"
        )
    if u_b <= 0:
        violations.append(f"u_b must be > 0, got {u_b:.6g}")
    elif u_a / u_b < settings.k1 * (1.0 - 1e-12):
        violations.append(
            f"u_a/u_b >= k1 violated: u_a/u_b={u_a / u_b:.6g}, k1={settings.k1:.6g}"
        )
    if not settings.mu1 < settings.mu2:
        violations.append(
            f"mu1 < mu2 violated: mu1={settings.mu1:.6g}, mu2={settings.mu2:.6g}"
        )
    return ConstraintReport(ok=not violations, violations=tuple(violations))


def decoy_sample_sizes(
    n_pulses: float, p_za: float, p_zb: float, m_slices: int
) -> SampleSizes:
    """Expected accepted-trial counts per decoy pair.

    Both users fall in the X-window with probability (1-p_za)(1-p_zb),
    each of the nine intensity pairs is chosen with probability 1/9,
    and phase post-selection keeps 2/M of the pairs.
    """
    n_pair = n_pulses * (1.0 - p_za) * (1.0 - p_zb) * (1.0 / 9.0) * (2.0 / m_slices)
    n_pair = max(n_pair, 1.0)
    return SampleSizes(n_mu1=n_pair, n_mu2=n_pair, n_vacuum=n_pair)


def apply_fluctuations(
    rates: ObservedRates, sizes: SampleSizes, policy: FluctuationPolicy
) -> ObservedRates:
    """Replace each rate by its worst-case deviation for the key rate.

    Gains entering the yield bound positively shrink, those entering
    negatively grow; the error product and the vacuum yield grow.  A
    rate whose deviation interval includes zero is floored at zero and
    the yield bound may then come out non-positive.
    """
    if not policy.enabled:
        return rates
    ns = policy.n_sigma

    def dev(rate: float, n: float) -> float:
        if rate <= 0.0:
            return 0.0
        return ns * math.sqrt(rate / n)

    return ObservedRates(
        q_mu1=max(0.0, rates.q_mu1 - dev(rates.q_mu1, sizes.n_mu1)),
        q_mu2=min(1.0, rates.q_mu2 + dev(rates.q_mu2, sizes.n_mu2)),
        qe_mu1=min(1.0, rates.qe_mu1 + dev(rates.qe_mu1, sizes.n_mu1)),
        y_0=min(1.0, rates.y_0 + dev(rates.y_0, sizes.n_vacuum)),
    )


def y1_lower(settings: DecoySettings, rates: ObservedRates) -> float:
    """Lower bound on the single-photon yield from the two decoy pairs.

    Valid whenever k1 <= k2 and mu1 < mu2; the denominator
    P2(mu2) P1(mu1) - P2(mu1) P1(mu2) is then strictly positive.
    """
    mu1, mu2 = settings.mu1, settings.mu2
    p1_mu1, p2_mu1, p0_mu1 = (poisson_pn(n, mu1) for n in (1, 2, 0))
    p1_mu2, p2_mu2, p0_mu2 = (poisson_pn(n, mu2) for n in (1, 2, 0))
    denom = p2_mu2 * p1_mu1 - p2_mu1 * p1_mu2
    if denom <= 0.0:
        raise DegenerateBoundError(
            f"degenerate decoy totals: mu1={mu1:.6g}, mu2={mu2:.6g} "
            "give a non-positive denominator"
        )
    numer = (
        p2_mu2 * rates.q_mu1
        - p2_mu1 * rates.q_mu2
        + (p2_mu1 * p0_mu2 - p2_mu2 * p0_mu1) * rates.y_0
    )
    return numer / denom


def e1_upper(
    settings: DecoySettings, rates: ObservedRates, y1_low: float
) -> tuple[float, bool]:
    """Upper bound on the single-photon error rate, clamped to [0, 0.5].

    Returns (bound, clamped).  e0 = 0.5 is the vacuum error rate.
    """
    if y1_low <= 0.0:
        raise DegenerateBoundError(
            "y1 lower bound is non-positive: no single-photon signal extractable"
        )
    mu1 = settings.mu1
    e0 = 0.5
    raw = (rates.qe_mu1 - poisson_pn(0, mu1) * rates.y_0 * e0) / (
        poisson_pn(1, mu1) * y1_low
    )
    clamped = not 0.0 <= raw <= 0.5
    return min(0.5, max(0.0, raw)), clamped


def asymptotic_rates(
    settings: DecoySettings, eta_a: float, eta_b: float, p_d: float
) -> ObservedRates:
    """Rates generated from the equivalent-yield model (no post-selection).

    Q_mu = sum_n P_n(mu) Y_n^k collapses to
    1 - (1 - p_d)^2 exp(-(x_a eta_a + x_b eta_b)); the error product is
    not defined by this model and is set to q/2.  Used by the bound
    validity sweeps, where only q_mu1, q_mu2 and y_0 enter.
    """

    def q_pair(x_a: float, x_b: float) -> float:
        arriving = x_a * eta_a + x_b * eta_b
        return 1.0 - (1.0 - p_d) ** 2 * math.exp(-arriving)

    y_0 = 1.0 - (1.0 - p_d) ** 2
    q1 = q_pair(settings.w_a, settings.w_b)
    q2 = q_pair(settings.v_a, settings.v_b)
    return ObservedRates(q_mu1=q1, q_mu2=q2, qe_mu1=q1 / 2.0, y_0=y_0)


def appendix_remainders(
    settings: DecoySettings, eta_a: float, eta_b: float, p_d: float
) -> tuple[float, float]:
    """Remainder terms of the yield-bound derivation.

    delta1 = sum_{n>=1} (Y_n^{k2} - Y_n^{k1}) P_n(mu2) >= 0 when
    k1 <= k2, and
    delta2 = sum_{n>=3} Y_n^{k1} [P2(mu1) P_n(mu2) - P2(mu2) P_n(mu1)]
    is strictly positive when mu1 < mu2.  delta2 is accumulated
    termwise so that its sign is not affected by cancellation.
    """
    mu1, mu2 = settings.mu1, settings.mu2
    k1, k2 = settings.k1, settings.k2
    n_max = truncation_cutoff(max(mu1, mu2))
    p2_mu1 = poisson_pn(2, mu1)
    p2_mu2 = poisson_pn(2, mu2)
    delta1 = 0.0
    delta2 = 0.0
    for n in range(1, n_max + 1):
        y_k1 = equivalent_yield_yn(n, k1, eta_a, eta_b, p_d)
        y_k2 = equivalent_yield_yn(n, k2, eta_a, eta_b, p_d)
        pn_mu2 = poisson_pn(n, mu2)
        delta1 += (y_k2 - y_k1) * pn_mu2
        if n >= 3:
            delta2 += y_k1 * (p2_mu1 * pn_mu2 - p2_mu2 * poisson_pn(n, mu1))
    return delta1, delta2


def matched_decoys(v_b: float, w_b: float, k1: float) -> DecoySettings:
    """Decoy pairs with both ratios pinned to k1 (matched arrival intensities)."""
    return DecoySettings(v_a=k1 * v_b, v_b=v_b, w_a=k1 * w_b, w_b=w_b)


__all__ = [
    "ConstraintReport",
    "DecoySettings",
    "DegenerateBoundError",
    "FluctuationPolicy",
    "ObservedRates",
    "SampleSizes",
    "appendix_remainders",
    "apply_fluctuations",
    "asymptotic_rates",
    "decoy_sample_sizes",
    "e1_upper",
    "matched_decoys",
    "validate_constraints",
    "y1_lower",
]
