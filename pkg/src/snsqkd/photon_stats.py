"""Photon-number statistics of a weak-coherent pulse pair.

The two users launch independent Poissonian pulses with mean photon
numbers x_a and x_b.  Conditioned on the total photon number n, the
detection side sees an equivalent yield that depends on n and on the
intensity ratio k = x_a / x_b only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class IntensityPair:
    """Mean photon numbers launched by Alice (x_a) and Bob (x_b)."""

    x_a: float
    x_b: float

    def __post_init__(self) -> None:
        if self.x_a < 0 or self.x_b < 0:
            raise ValueError("intensities must be >= 0")

    @property
    def total(self) -> float:
        return self.x_a + self.x_b

    @property
    def ratio(self) -> float:
        """Intensity ratio k = x_a / x_b. Infinite when x_b == 0, x_a > 0."""
        if self.x_b == 0.0:
            if self.x_a == 0.0:
                raise ValueError("ratio undefined for a vacuum pair")
            return math.inf
        return self.x_a / self.x_b


def poisson_pn(n: int, mu: float) -> float:
    """Poisson probability of n photons at mean mu."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if mu < 0:
        raise ValueError("mu must be >= 0")
    if mu == 0.0:
        return 1.0 if n == 0 else 0.0
    return math.exp(n * math.log(mu) - mu - math.lgamma(n + 1))


def poisson_mixture_pn(n: int, pair: IntensityPair) -> float:
    """Probability that the pulse pair carries n photons in total.

    The convolution of the two Poisson distributions collapses to a
    single Poisson with mean x_a + x_b.
    """
    return poisson_pn(n, pair.total)


def effective_gain_qn(
    n: int, pair: IntensityPair, eta_a: float, eta_b: float, p_d: float
) -> float:
    """Joint probability of sending n photons total and seeing a click.

    Sums over the m photons from Alice and n - m from Bob; each arm
    photon is lost independently, and a click requires at least one
    detected photon or a dark count on either detector.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    no_dark = (1.0 - p_d) ** 2
    total = 0.0
    for m in range(n + 1):
        p_split = poisson_pn(m, pair.x_a) * poisson_pn(n - m, pair.x_b)
        p_click = 1.0 - no_dark * (1.0 - eta_a) ** m * (1.0 - eta_b) ** (n - m)
        total += p_split * p_click
    return total


def equivalent_yield_yn(
    n: int, k: float, eta_a: float, eta_b: float, p_d: float
) -> float:
    """Equivalent yield of the n-photon effective event.

    Y_n^k = 1 - (1 - p_d)^2 * [(k (1 - eta_a) + (1 - eta_b)) / (k + 1)]^n,
    where k is the intensity ratio of the pair.  k = inf selects the
    single-arm limit (all light from Alice).
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if not k > 0:
        raise ValueError("intensity ratio k must be > 0")
    if math.isinf(k):
        z = 1.0 - eta_a
    else:
        z = (k * (1.0 - eta_a) + (1.0 - eta_b)) / (k + 1.0)
    return 1.0 - (1.0 - p_d) ** 2 * z**n


def truncation_cutoff(mu: float, *, margin: float = 20.0) -> int:
    """Photon-number cutoff leaving Poisson tail mass below ~1e-15."""
    return int(math.ceil(mu + 12.0 * math.sqrt(mu) + margin))
