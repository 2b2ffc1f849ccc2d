"""Cross-validation of the analytic model against the Monte Carlo oracle.

Builds a table of analytic predictions next to simulated frequencies
with their binomial sigma-distances.  A comparison passes when it lies
within 4 sigma; cells with too few trials are reported but skipped.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .channel import LinkGeometry, SystemParams, arm_transmittances
from .decoy import FluctuationPolicy
from .keyrate import ProtocolParams, key_rate_from_transmittances
from .montecarlo import (
    InsufficientStatisticsError,
    PulseTally,
    PulseTrialConfig,
    simulate,
    single_photon_statistics,
)
from .photon_stats import equivalent_yield_yn
from .xwindow import averaged_observables
from .zwindow import Z_CASES, z_gain_case, z_observables

SIGMA_LIMIT = 4.0
MIN_CELL_TRIALS = 1000

_PAIR_ORDER = [(a, b) for a in ("v", "w", "o") for b in ("v", "w", "o")]


@dataclass(frozen=True)
class ValidationRow:
    name: str
    expected: float
    observed: float
    sigma: float
    distance: float
    passed: bool
    note: str = ""


@dataclass
class ValidationReport:
    rows: list[ValidationRow]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def worst(self) -> float:
        return max((abs(r.distance) for r in self.rows if not r.note), default=0.0)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "rows": [asdict(r) for r in self.rows]}


def _binomial_row(name: str, expected: float, count: int, trials: int) -> ValidationRow:
    observed = count / trials
    sigma = math.sqrt(max(expected * (1.0 - expected), 1e-300) / trials)
    distance = (observed - expected) / sigma
    return ValidationRow(
        name=name,
        expected=expected,
        observed=observed,
        sigma=sigma,
        distance=distance,
        passed=abs(distance) <= SIGMA_LIMIT,
    )


def _skipped_row(name: str, expected: float, note: str) -> ValidationRow:
    return ValidationRow(
        name=name, expected=expected, observed=math.nan, sigma=math.nan,
        distance=math.nan, passed=True, note=note,
    )


def build_report(
    sys: SystemParams,
    geom: LinkGeometry,
    params: ProtocolParams,
    tally: PulseTally,
) -> ValidationReport:
    """Compare every measurable cell of the tally with the analytic model."""
    eta_a, eta_b = arm_transmittances(sys, geom)
    m = params.effective_m(sys)
    d = params.decoys
    intensities_a = {"v": d.v_a, "w": d.w_a, "o": 0.0}
    intensities_b = {"v": d.v_b, "w": d.w_b, "o": 0.0}
    rows: list[ValidationRow] = []

    # Phase post-selection acceptance, pooled over intensity pairs.
    total_pairs = sum(tally.x_pair_trials.values())
    total_accepted = sum(tally.x_pair_accepted.values())
    if total_pairs >= MIN_CELL_TRIALS:
        rows.append(_binomial_row("x_acceptance", 2.0 / m, total_accepted, total_pairs))

    # X-window gains and QBERs per intensity pair (both bands pooled).
    for pair in _PAIR_ORDER:
        cell = tally.x_summary(pair)
        label = f"x_gain[{pair[0]},{pair[1]}]"
        obs = averaged_observables(
            intensities_a[pair[0]], intensities_b[pair[1]],
            eta_a, eta_b, sys.p_d, sys.e_d, m,
        )
        if cell.trials < MIN_CELL_TRIALS:
            rows.append(_skipped_row(label, obs.gain, "low_stats"))
            continue
        rows.append(_binomial_row(label, obs.gain, cell.effective, cell.trials))
        qlabel = f"x_qber[{pair[0]},{pair[1]}]"
        if cell.effective >= 25:
            rows.append(_binomial_row(qlabel, obs.qber, cell.errors, cell.effective))
        else:
            rows.append(_skipped_row(qlabel, obs.qber, "low_stats"))

    # Band symmetry of the mu1 pair: the pi-opposed slice must mirror
    # the matched slice once detector roles are exchanged.
    band0 = tally.x_summary(("w", "w"), band=0)
    band1 = tally.x_summary(("w", "w"), band=1)
    if band0.effective >= 25 and band1.effective >= 25:
        e0 = band0.errors / band0.effective
        e1 = band1.errors / band1.effective
        pooled = (band0.errors + band1.errors) / (band0.effective + band1.effective)
        sigma = math.sqrt(
            max(pooled * (1.0 - pooled), 1e-300)
            * (1.0 / band0.effective + 1.0 / band1.effective)
        )
        distance = (e1 - e0) / sigma
        rows.append(
            ValidationRow(
                name="x_band_symmetry[w,w]",
                expected=e0,
                observed=e1,
                sigma=sigma,
                distance=distance,
                passed=abs(distance) <= SIGMA_LIMIT,
            )
        )

    # Photon-tagged counting rates of the mu1 pair: at-least-one-click
    # frequency per launched photon number, against the equivalent yield.
    for n in range(4):
        cell = tally.x_by_tag(("w", "w"), n)
        label = f"x_yield[w,w][n={n}]"
        y_n = equivalent_yield_yn(n, d.k1, eta_a, eta_b, sys.p_d) if n else (
            1.0 - (1.0 - sys.p_d) ** 2
        )
        if cell.trials < MIN_CELL_TRIALS:
            rows.append(_skipped_row(label, y_n, "low_stats"))
            continue
        rows.append(_binomial_row(label, y_n, cell.clicked_any, cell.trials))

    # Z-window: per-case gains and the pooled gain / QBER.
    zp = params.z_params()
    for case in Z_CASES:
        cell = tally.z_summary(case)
        label = f"z_gain[{case}]"
        expected = z_gain_case(case, zp, eta_a, eta_b, sys.p_d)
        if cell.trials < MIN_CELL_TRIALS:
            rows.append(_skipped_row(label, expected, "low_stats"))
            continue
        rows.append(_binomial_row(label, expected, cell.effective, cell.trials))
    z_all = tally.z_summary()
    if z_all.trials >= MIN_CELL_TRIALS:
        z_expected = z_observables(zp, eta_a, eta_b, sys.p_d)
        rows.append(_binomial_row("z_gain", z_expected.gain, z_all.effective, z_all.trials))
        if z_all.effective >= 25:
            rows.append(
                _binomial_row("z_qber", z_expected.qber, z_all.errors, z_all.effective)
            )

    # Single-photon bounds versus tagged truth (one-sided comparisons).
    try:
        sp = single_photon_statistics(tally)
    except InsufficientStatisticsError as exc:
        rows.append(_skipped_row("y1_bound", math.nan, f"skipped: {exc}"))
    else:
        bd = key_rate_from_transmittances(
            sys, eta_a, eta_b, params, FluctuationPolicy.disabled()
        )
        dist = (bd.y1_low - sp.y1) / sp.y1_sigma
        rows.append(
            ValidationRow(
                name="y1_bound",
                expected=bd.y1_low,
                observed=sp.y1,
                sigma=sp.y1_sigma,
                distance=dist,
                passed=dist <= SIGMA_LIMIT,
                note="one_sided",
            )
        )
        if bd.e1_up is not None:
            dist = (sp.e1 - bd.e1_up) / sp.e1_sigma
            rows.append(
                ValidationRow(
                    name="e1_bound",
                    expected=bd.e1_up,
                    observed=sp.e1,
                    sigma=sp.e1_sigma,
                    distance=dist,
                    passed=dist <= SIGMA_LIMIT,
                    note="one_sided",
                )
            )
    return ValidationReport(rows=rows)


def run_validation(
    sys: SystemParams,
    geom: LinkGeometry,
    params: ProtocolParams,
    n_trials: int,
    seed: int = 0,
    workers: int = 1,
) -> ValidationReport:
    """Simulate and compare in one step."""
    config = PulseTrialConfig(
        sys=sys, geom=geom, params=params, n_trials=n_trials, seed=seed
    )
    tally = simulate(config, workers=workers)
    return build_report(sys, geom, params, tally)
