"""Pulse-level Monte Carlo protocol simulation.

Serves as the independent oracle for every analytic observable.  Each
trial draws window choices, send / intensity decisions and random
phases, launches Poissonian photon pairs (the total launched photon
number is recorded as a tag), thins each arm binomially by its
transmittance, and splits the arrived photons between the two output
ports with the interference probability of the post-beam-splitter
coherent state.  Port splitting of a Poisson pair is distribution-
identical to sampling the two ports as independent Poisson variables,
so protocol-level click statistics follow the fixed-phase gain and
error formulas exactly while per-tag cell rates follow the n-photon
counting-rate model.

Trials are processed in fixed-size chunks; chunk c uses a Philox
stream keyed by (seed, c), so tallies are reproducible and independent
of how chunks are distributed over workers.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from .channel import LinkGeometry, SystemParams, arm_transmittances
from .keyrate import ProtocolParams

CHUNK_TRIALS = 1 << 20

# Photon-number tags at or above this value share one pooled cell.
TAG_CAP = 63

INTENSITY_NAMES = ("v", "w", "o")
Z_CASE_NAMES = ("neither", "bob_only", "alice_only", "both")  # index = (send_a<<1)|send_b

Mode = Literal["full_protocol", "fixed_phase", "z_only", "x_only"]


class InsufficientStatisticsError(RuntimeError):
    """Raised when a tally has too few events for the requested estimate."""


@dataclass(frozen=True)
class FixedPhase:
    """Intensities and phases for the fixed-phase validation mode."""

    alpha: float
    beta: float
    delta_a: float
    delta_b: float


@dataclass(frozen=True)
class PulseTrialConfig:
    sys: SystemParams
    geom: LinkGeometry
    params: ProtocolParams
    n_trials: int
    seed: int = 0
    mode: Mode = "full_protocol"
    fixed: Optional[FixedPhase] = None

    def __post_init__(self) -> None:
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.mode not in ("full_protocol", "fixed_phase", "z_only", "x_only"):
            raise ValueError(f"unknown mode: {self.mode!r}")
        if (self.mode == "fixed_phase") != (self.fixed is not None):
            raise ValueError("fixed phases must be given exactly for mode='fixed_phase'")


@dataclass
class CellCounts:
    trials: int = 0
    clicked_any: int = 0
    effective: int = 0
    errors: int = 0

    def add(self, trials: int, clicked_any: int, effective: int, errors: int) -> None:
        self.trials += trials
        self.clicked_any += clicked_any
        self.effective += effective
        self.errors += errors


@dataclass
class PulseTally:
    """Exact integer counters per (window, pair, band, photon-tag) cell."""

    n_trials: int = 0
    n_z_trials: int = 0
    n_x_trials: int = 0
    cells: dict = field(default_factory=dict)
    x_pair_trials: dict = field(default_factory=dict)
    x_pair_accepted: dict = field(default_factory=dict)

    def merge(self, other: "PulseTally") -> None:
        self.n_trials += other.n_trials
        self.n_z_trials += other.n_z_trials
        self.n_x_trials += other.n_x_trials
        for key, c in other.cells.items():
            self.cells.setdefault(key, CellCounts()).add(
                c.trials, c.clicked_any, c.effective, c.errors
            )
        for d_self, d_other in (
            (self.x_pair_trials, other.x_pair_trials),
            (self.x_pair_accepted, other.x_pair_accepted),
        ):
            for key, v in d_other.items():
                d_self[key] = d_self.get(key, 0) + v

    # -- aggregation helpers -------------------------------------------------

    def z_summary(self, case: Optional[str] = None) -> CellCounts:
        total = CellCounts()
        for key, c in self.cells.items():
            if key[0] != "Z":
                continue
            if case is not None and key[1] != case:
                continue
            total.add(c.trials, c.clicked_any, c.effective, c.errors)
        return total

    def x_summary(
        self, pair: tuple[str, str], band: Optional[int] = None
    ) -> CellCounts:
        total = CellCounts()
        for key, c in self.cells.items():
            if key[0] != "X" or (key[1], key[2]) != pair:
                continue
            if band is not None and key[3] != band:
                continue
            total.add(c.trials, c.clicked_any, c.effective, c.errors)
        return total

    def x_by_tag(self, pair: tuple[str, str], n: int) -> CellCounts:
        total = CellCounts()
        for band in (0, 1):
            c = self.cells.get(("X", pair[0], pair[1], band, n))
            if c is not None:
                total.add(c.trials, c.clicked_any, c.effective, c.errors)
        return total

    def acceptance_fraction(self, pair: tuple[str, str]) -> float:
        trials = self.x_pair_trials.get(pair, 0)
        if trials == 0:
            raise InsufficientStatisticsError(f"no X-window trials for pair {pair}")
        return self.x_pair_accepted.get(pair, 0) / trials

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        cells = {
            "|".join(str(part) for part in key): vars(c)
            for key, c in sorted(self.cells.items())
        }
        return {
            "n_trials": self.n_trials,
            "n_z_trials": self.n_z_trials,
            "n_x_trials": self.n_x_trials,
            "cells": cells,
            "x_pair_trials": {f"{a}|{b}": v for (a, b), v in sorted(self.x_pair_trials.items())},
            "x_pair_accepted": {f"{a}|{b}": v for (a, b), v in sorted(self.x_pair_accepted.items())},
        }

    def write_json(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)


@dataclass(frozen=True)
class SinglePhotonStats:
    """Directly measured single-photon yield and error rate (tagged cells)."""

    y1: float
    e1: float
    y1_sigma: float
    e1_sigma: float
    trials: int
    effective: int
    errors: int


def _detect(rng, x_a, x_b, theta, eta_a, eta_b, p_d):
    """Launch, thin, interfere and detect one batch of pulse pairs.

    Returns (tag, clicked_any, effective, d1_only, d2_only) where tag is
    the total launched photon number.
    """
    launched_a = rng.poisson(x_a)
    launched_b = rng.poisson(x_b)
    arrived_a = rng.binomial(launched_a, eta_a)
    arrived_b = rng.binomial(launched_b, eta_b)
    i_a = x_a * eta_a
    i_b = x_b * eta_b
    s = i_a + i_b
    with np.errstate(invalid="ignore", divide="ignore"):
        q1 = np.where(s > 0.0, 0.5 + np.sqrt(i_a * i_b) * np.cos(theta) / np.where(s > 0.0, s, 1.0), 0.5)
    q1 = np.clip(q1, 0.0, 1.0)
    arrived = arrived_a + arrived_b
    d1 = rng.binomial(arrived, q1)
    d2 = arrived - d1
    click1 = (d1 > 0) | (rng.random(len(theta)) < p_d)
    click2 = (d2 > 0) | (rng.random(len(theta)) < p_d)
    tag = launched_a + launched_b
    return (
        tag,
        click1 | click2,
        click1 ^ click2,
        click1 & ~click2,
        click2 & ~click1,
    )


def _accumulate(tally, keys, codes, n_codes, clicked_any, effective, errors, tags):
    """Add per-cell counters via bincount over composite integer codes."""
    tags = np.minimum(tags, TAG_CAP)
    full = codes * (TAG_CAP + 1) + tags
    minlength = n_codes * (TAG_CAP + 1)
    trials_c = np.bincount(full, minlength=minlength)
    any_c = np.bincount(full[clicked_any], minlength=minlength)
    eff_c = np.bincount(full[effective], minlength=minlength)
    err_c = np.bincount(full[errors], minlength=minlength)
    for idx in np.nonzero(trials_c)[0]:
        key = keys[idx // (TAG_CAP + 1)] + (int(idx % (TAG_CAP + 1)),)
        tally.cells.setdefault(key, CellCounts()).add(
            int(trials_c[idx]), int(any_c[idx]), int(eff_c[idx]), int(err_c[idx])
        )


def _chunk_tally(config: PulseTrialConfig, chunk_index: int, n: int) -> PulseTally:
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=config.seed, spawn_key=(chunk_index,)))
    )
    sys, params = config.sys, config.params
    eta_a, eta_b = arm_transmittances(sys, config.geom)
    m = params.effective_m(sys)
    two_pi = 2.0 * math.pi
    tally = PulseTally(n_trials=n)

    if config.mode == "fixed_phase":
        fx = config.fixed
        theta = np.full(n, fx.delta_a - fx.delta_b)
        tag, any_c, eff, d1o, d2o = _detect(
            rng, np.full(n, fx.alpha), np.full(n, fx.beta), theta, eta_a, eta_b, sys.p_d
        )
        flip = rng.random(n) < sys.e_d
        errors = eff & (d2o ^ flip)
        pair = ("fixed", "fixed")
        tally.n_x_trials = n
        tally.x_pair_trials[pair] = n
        tally.x_pair_accepted[pair] = n
        keys = [("X", "fixed", "fixed", 0)]
        _accumulate(tally, keys, np.zeros(n, dtype=np.int64), 1, any_c, eff, errors, tag)
        return tally

    if config.mode == "z_only":
        in_z = np.ones(n, dtype=bool)
        in_x = np.zeros(n, dtype=bool)
    elif config.mode == "x_only":
        in_z = np.zeros(n, dtype=bool)
        in_x = np.ones(n, dtype=bool)
    else:
        za = rng.random(n) < params.p_za
        zb = rng.random(n) < params.p_zb
        in_z = za & zb
        in_x = ~za & ~zb

    n_z = int(np.count_nonzero(in_z))
    n_x = int(np.count_nonzero(in_x))
    tally.n_z_trials = n_z
    tally.n_x_trials = n_x

    if n_z:
        send_a = rng.random(n_z) < params.eps_a
        send_b = rng.random(n_z) < params.eps_b
        x_a = np.where(send_a, params.u_a, 0.0)
        x_b = np.where(send_b, params.u_b, 0.0)
        theta = rng.uniform(0.0, two_pi, n_z)
        tag, any_c, eff, _, _ = _detect(rng, x_a, x_b, theta, eta_a, eta_b, sys.p_d)
        case = (send_a.astype(np.int64) << 1) | send_b.astype(np.int64)
        errors = eff & ((case == 3) | (case == 0))
        keys = [("Z", name) for name in Z_CASE_NAMES]
        _accumulate(tally, keys, case, 4, any_c, eff, errors, tag)

    if n_x:
        d = params.decoys
        alice_int = np.array([d.v_a, d.w_a, 0.0])
        bob_int = np.array([d.v_b, d.w_b, 0.0])
        ia = rng.integers(0, 3, n_x)
        ib = rng.integers(0, 3, n_x)
        delta_a = rng.uniform(0.0, two_pi, n_x)
        delta_b = rng.uniform(0.0, two_pi, n_x)
        pair_code = ia * 3 + ib
        slice_a = np.floor(delta_a * m / two_pi).astype(np.int64)
        slice_b = np.floor(delta_b * m / two_pi).astype(np.int64)
        diff = (slice_a - slice_b) % m
        band1 = diff == m // 2
        accepted = (diff == 0) | band1

        pair_counts = np.bincount(pair_code, minlength=9)
        acc_counts = np.bincount(pair_code[accepted], minlength=9)
        for code in range(9):
            if pair_counts[code] == 0:
                continue
            pair = (INTENSITY_NAMES[code // 3], INTENSITY_NAMES[code % 3])
            tally.x_pair_trials[pair] = tally.x_pair_trials.get(pair, 0) + int(pair_counts[code])
            tally.x_pair_accepted[pair] = tally.x_pair_accepted.get(pair, 0) + int(acc_counts[code])

        if np.any(accepted):
            ia_s = ia[accepted]
            ib_s = ib[accepted]
            band_s = band1[accepted].astype(np.int64)
            theta = (delta_a - delta_b)[accepted]
            tag, any_c, eff, d1o, d2o = _detect(
                rng, alice_int[ia_s], bob_int[ib_s], theta, eta_a, eta_b, sys.p_d
            )
            # Band 0 expects detector 1 (bright port near zero phase
            # difference); band 1 expects detector 2.  Misalignment
            # flips the classification with probability e_d.
            wrong = np.where(band_s == 0, d2o, d1o)
            flip = rng.random(len(theta)) < sys.e_d
            errors = eff & (wrong ^ flip)
            codes = (ia_s * 3 + ib_s) * 2 + band_s
            keys = []
            for code in range(9):
                pa = INTENSITY_NAMES[code // 3]
                pb = INTENSITY_NAMES[code % 3]
                keys.extend([("X", pa, pb, 0), ("X", pa, pb, 1)])
            _accumulate(tally, keys, codes, 18, any_c, eff, errors, tag)

    return tally


def _chunk_worker(args: tuple) -> PulseTally:
    return _chunk_tally(*args)


def simulate(config: PulseTrialConfig, workers: int = 1) -> PulseTally:
    """Run the simulation and return merged per-cell tallies.

    The result is a pure function of (config, n_trials); `workers` only
    distributes fixed-size chunks and never changes the tallies.
    """
    n_chunks = (config.n_trials + CHUNK_TRIALS - 1) // CHUNK_TRIALS
    jobs = []
    remaining = config.n_trials
    for c in range(n_chunks):
        size = min(CHUNK_TRIALS, remaining)
        jobs.append((config, c, size))
        remaining -= size

    total = PulseTally()
    if workers <= 1 or n_chunks == 1:
        for job in jobs:
            total.merge(_chunk_tally(*job))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for tally in pool.map(_chunk_worker, jobs, chunksize=1):
                total.merge(tally)
    return total


def single_photon_statistics(
    tally: PulseTally, pair: tuple[str, str] = ("w", "w"), min_effective: int = 100
) -> SinglePhotonStats:
    """Yield and error rate measured directly on tagged n=1 cells.

    A real experiment cannot tag photon numbers; the simulation can,
    which is what makes this a valid oracle for the decoy bounds.
    """
    c = tally.x_by_tag(pair, 1)
    if c.effective < min_effective:
        raise InsufficientStatisticsError(
            f"only {c.effective} effective n=1 events for pair {pair} "
            f"(need >= {min_effective})"
        )
    y1 = c.effective / c.trials
    e1 = c.errors / c.effective
    return SinglePhotonStats(
        y1=y1,
        e1=e1,
        y1_sigma=math.sqrt(max(y1 * (1.0 - y1), 1e-300) / c.trials),
        e1_sigma=math.sqrt(max(e1 * (1.0 - e1), 1e-300) / c.effective),
        trials=c.trials,
        effective=c.effective,
        errors=c.errors,
    )
