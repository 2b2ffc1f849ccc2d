"""Decoy-window (X-window) observables.

After the beam splitter the two-mode coherent state produces detector
intensities s/2 +- sqrt(alpha beta eta_a eta_b) cos(delta_a - delta_b),
with s the total arriving intensity.  The gain is the probability that
exactly one threshold detector fires; the error is the probability that
only the wrong-port detector fires.  Phase post-selection keeps a
(2pi/M)^2 cell of random-phase pairs, and misalignment enters the
analytic average as an equivalent phase offset Delta applied to one
integration limit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class XWindowObservables:
    """Phase-averaged gain and error rate of one decoy intensity pair."""

    gain: float
    qber: float
    e_sys: float
    delta_offset: float


def _arrival(alpha: float, beta: float, eta_a: float, eta_b: float) -> tuple[float, float]:
    """Total arriving intensity s and interference amplitude c."""
    i_a = alpha * eta_a
    i_b = beta * eta_b
    return i_a + i_b, math.sqrt(i_a * i_b)


def gain_fixed_phase(alpha, beta, delta_a, delta_b, eta_a, eta_b, p_d):
    """Single-click probability at fixed random phases.

    Accepts scalars or numpy arrays for the phases.  Evaluated in a
    cancellation-safe form: the no-light value 2 p_d (1 - p_d) is exact
    even for p_d near the double-precision floor.
    """
    s, c = _arrival(alpha, beta, eta_a, eta_b)
    g = math.log1p(-p_d)
    cz = c * np.cos(np.asarray(delta_a) - np.asarray(delta_b))
    # u = 1 - (1 - p_d) e^{-s/2}
    u = -math.expm1(g - 0.5 * s)
    out = 2.0 * (1.0 - p_d) * math.exp(-0.5 * s) * (2.0 * np.sinh(0.5 * cz) ** 2 + u)
    return float(out) if np.ndim(out) == 0 else out


def error_fixed_phase(alpha, beta, delta_a, delta_b, eta_a, eta_b, p_d):
    """Wrong-port-only click probability (the product Q * E) at fixed phases."""
    s, c = _arrival(alpha, beta, eta_a, eta_b)
    g = math.log1p(-p_d)
    cz = c * np.cos(np.asarray(delta_a) - np.asarray(delta_b))
    out = (1.0 - p_d) * np.exp(-0.5 * s - cz) * (-np.expm1(g - 0.5 * s + cz))
    return float(out) if np.ndim(out) == 0 else out


def system_error(
    alpha: float, beta: float, eta_a: float, eta_b: float, e_d: float
) -> tuple[float, float]:
    """Single-photon-interference error rate and equivalent phase offset.

    e_sys = 1/2 - r + 2 r e_d with r = sqrt(I_a I_b) / (I_a + I_b) built
    from the arriving intensities of the pair under evaluation, and
    Delta = arccos(1 - 2 e_sys).
    """
    i_a = alpha * eta_a
    i_b = beta * eta_b
    total = i_a + i_b
    if total <= 0.0:
        raise ValueError("system_error requires nonzero arriving intensity")
    r = math.sqrt(i_a * i_b) / total
    e_sys = 0.5 - r + 2.0 * r * e_d
    delta = math.acos(max(-1.0, min(1.0, 1.0 - 2.0 * e_sys)))
    return e_sys, delta


@lru_cache(maxsize=8)
def _gl_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def averaged_observables(
    alpha: float,
    beta: float,
    eta_a: float,
    eta_b: float,
    p_d: float,
    e_d: float,
    m_slices: int,
    nodes: int = 32,
) -> XWindowObservables:
    """Phase-slice-averaged gain and QBER of one decoy pair.

    Gauss-Legendre quadrature over delta_a in [0, 2pi/M] and
    delta_b in [Delta, 2pi/M + Delta], normalized to the cell average.
    A pure vacuum pair has a constant integrand and is returned in
    closed form.
    """
    if m_slices < 2:
        raise ValueError("m_slices must be >= 2")
    s, _ = _arrival(alpha, beta, eta_a, eta_b)
    if s == 0.0:
        gain = 2.0 * p_d * (1.0 - p_d)
        return XWindowObservables(gain=gain, qber=0.5, e_sys=0.5, delta_offset=0.5 * math.pi)

    e_sys, delta = system_error(alpha, beta, eta_a, eta_b, e_d)
    width = 2.0 * math.pi / m_slices
    x, w = _gl_nodes(nodes)
    da = 0.5 * width * (x + 1.0)
    db = delta + 0.5 * width * (x + 1.0)
    phase_diff = da[:, None] - db[None, :]
    weights = w[:, None] * w[None, :]  # total weight 4, matching the unit square

    q_vals = gain_fixed_phase(alpha, beta, phase_diff, 0.0, eta_a, eta_b, p_d)
    qe_vals = error_fixed_phase(alpha, beta, phase_diff, 0.0, eta_a, eta_b, p_d)
    gain = float(np.sum(weights * q_vals) / 4.0)
    qe = float(np.sum(weights * qe_vals) / 4.0)
    if gain <= 0.0:
        raise ValueError("degenerate X-window: zero averaged gain")
    return XWindowObservables(gain=gain, qber=qe / gain, e_sys=e_sys, delta_offset=delta)
