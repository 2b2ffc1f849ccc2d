"""Signal-window (Z-window) gain and QBER.

Key bits encode the send / not-send decision, so no interference
outcome is used: an effective event is any single detector click.
Mismatched rows of the key map (both send, neither sends) are errors;
misalignment does not enter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

from scipy.special import i0, i0e

ZCase = Literal["both", "alice_only", "bob_only", "neither"]

Z_CASES: tuple[ZCase, ...] = ("both", "alice_only", "bob_only", "neither")


@dataclass(frozen=True)
class ZWindowParams:
    """Signal intensities and sending probabilities."""

    u_a: float
    u_b: float
    eps_a: float
    eps_b: float

    def __post_init__(self) -> None:
        if self.u_a < 0 or self.u_b < 0:
            raise ValueError("signal intensities must be >= 0")
        for name in ("eps_a", "eps_b"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")


@dataclass(frozen=True)
class ZWindowObservables:
    gain: float
    qber: float


def _single_arm_gain(arriving: float, p_d: float) -> float:
    """Single-click probability when only one arm carries light.

    The beam splitter sends intensity I/2 to each detector, so
    Q = 2 (1 - p_d) e^{-I/2} (1 - (1 - p_d) e^{-I/2}).
    """
    g = math.log1p(-p_d)
    u = -math.expm1(g - 0.5 * arriving)
    return 2.0 * (1.0 - p_d) * math.exp(-0.5 * arriving) * u


def _both_send_gain(i_a: float, i_b: float, p_d: float) -> float:
    """Single-click probability for both-send, averaged over the phase difference.

    The uniform phase average of the fixed-phase gain turns the cosh
    term into a modified Bessel function:
    Q = 2 (1 - p_d) e^{-s/2} I0(c) - 2 (1 - p_d)^2 e^{-s}.
    """
    s = i_a + i_b
    c = math.sqrt(i_a * i_b)
    g = math.log1p(-p_d)
    if c < 30.0:
        u = -math.expm1(g - 0.5 * s)
        return 2.0 * (1.0 - p_d) * math.exp(-0.5 * s) * ((i0(c) - 1.0) + u)
    return 2.0 * (1.0 - p_d) * (
        math.exp(c - 0.5 * s) * i0e(c) - (1.0 - p_d) * math.exp(-s)
    )


def z_gain_case(
    case: ZCase, params: ZWindowParams, eta_a: float, eta_b: float, p_d: float
) -> float:
    """Single-click probability conditioned on one send / not-send case."""
    if case == "neither":
        return 2.0 * p_d * (1.0 - p_d)
    if case == "alice_only":
        return _single_arm_gain(params.u_a * eta_a, p_d)
    if case == "bob_only":
        return _single_arm_gain(params.u_b * eta_b, p_d)
    if case == "both":
        return _both_send_gain(params.u_a * eta_a, params.u_b * eta_b, p_d)
    raise ValueError(f"unknown Z-window case: {case!r}")


def z_observables(
    params: ZWindowParams, eta_a: float, eta_b: float, p_d: float
) -> ZWindowObservables:
    """Average Z-window gain and QBER over the four send / not-send cases.

    Errors are the mismatched key rows: both-send and neither-send.
    """
    ea, eb = params.eps_a, params.eps_b
    q_both = z_gain_case("both", params, eta_a, eta_b, p_d)
    q_ao = z_gain_case("alice_only", params, eta_a, eta_b, p_d)
    q_bo = z_gain_case("bob_only", params, eta_a, eta_b, p_d)
    q_nn = z_gain_case("neither", params, eta_a, eta_b, p_d)
    gain = (
        ea * (1.0 - eb) * q_ao
        + eb * (1.0 - ea) * q_bo
        + ea * eb * q_both
        + (1.0 - ea) * (1.0 - eb) * q_nn
    )
    errors = ea * eb * q_both + (1.0 - ea) * (1.0 - eb) * q_nn
    if gain <= 0.0:
        raise ValueError("degenerate Z-window: zero gain, QBER undefined")
    return ZWindowObservables(gain=gain, qber=errors / gain)
