"""Global protocol-parameter optimization.

Multi-start Nelder-Mead direct search over the free knobs, with
Alice's intensities tied to Bob's through the intensity-matching rules
(u_a = k1 u_b, v_a = k1 v_b, w_a = k1 w_b with k1 = eta_b / eta_a), so
every evaluated point satisfies the decoy-bound constraints or is
rejected before the model runs.  Start points come from a scrambled
Halton sequence; results are a pure function of the seed.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .channel import LinkGeometry, SystemParams, arm_transmittances
from .decoy import FluctuationPolicy, validate_constraints
from .keyrate import (
    ProtocolParams,
    RateBreakdown,
    key_rate_from_transmittances,
    matched_params,
)

FREE_VARIABLE_NAMES = (
    "u_b",
    "v_b",
    "w_b",
    "eps_a",
    "eps_b",
    "p_za",
    "p_zb",
    "m_slices",
)

DEFAULT_BOUNDS: dict[str, tuple[float, float]] = {
    "u_b": (0.01, 1.5),
    "v_b": (0.005, 0.8),
    "w_b": (1e-4, 0.3),
    "eps_a": (1e-4, 0.5),
    "eps_b": (1e-4, 0.5),
    "p_za": (0.05, 0.95),
    "p_zb": (0.05, 0.95),
}

DEFAULT_VALUES: dict[str, float] = {
    "u_b": 0.45,
    "v_b": 0.10,
    "w_b": 0.02,
    "eps_a": 0.02,
    "eps_b": 0.30,
    "p_za": 0.70,
    "p_zb": 0.70,
}

DEFAULT_M_GRID = (4, 8, 12, 16, 24, 32)

_INFEASIBLE = 1e9


@dataclass(frozen=True)
class OptimizationSpec:
    """Search definition: free variables, box bounds, restarts, budget.

    `budget` caps the model evaluations spent by the simplex search per
    phase-slice value (initial-point evaluations are not charged), so
    budget=0 degenerates to picking the best start point.  Variables
    not in `free` are pinned at `defaults`.
    """

    free: tuple[str, ...] = ("u_b", "v_b", "w_b", "eps_a", "eps_b", "p_za", "p_zb")
    bounds: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_BOUNDS)
    )
    defaults: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_VALUES))
    restarts: int = 16
    budget: int = 4000
    seed: int = 0
    m_grid: tuple[int, ...] = DEFAULT_M_GRID
    workers: int = 1
    extra_starts: tuple[tuple[tuple[str, float], ...], ...] = ()

    def __post_init__(self) -> None:
        for name in self.free:
            if name not in FREE_VARIABLE_NAMES:
                raise ValueError(f"unknown free variable {name!r}")
        for name, (lo, hi) in self.bounds.items():
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"bounds for {name!r} must be finite and ordered")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if "m_slices" in self.free and not self.m_grid:
            raise ValueError("m_slices is free but m_grid is empty")

    def continuous_free(self, symmetric: bool) -> tuple[str, ...]:
        names = [v for v in self.free if v != "m_slices"]
        if symmetric:
            names = [v for v in names if v not in ("eps_a", "p_za")]
        return tuple(names)


@dataclass
class RestartTrace:
    index: int
    start: dict[str, float]
    evaluations: int
    best_raw: float
    best_so_far: list[float]
    best_x: list[float] = field(default_factory=list)


@dataclass
class OptimizationResult:
    best_params: ProtocolParams
    best: RateBreakdown
    evaluations: int
    traces: list[RestartTrace]
    m_slices: int
    symmetric: bool


def _build_params(
    eta_a: float,
    eta_b: float,
    values: dict[str, float],
    m: Optional[int],
    symmetric: bool,
) -> ProtocolParams:
    if symmetric:
        values = {**values, "eps_a": values["eps_b"], "p_za": values["p_zb"]}
    return matched_params(
        eta_a,
        eta_b,
        u_b=values["u_b"],
        v_b=values["v_b"],
        w_b=values["w_b"],
        eps_a=values["eps_a"],
        eps_b=values["eps_b"],
        p_za=values["p_za"],
        p_zb=values["p_zb"],
        m_slices=m,
    )


def _make_objective(sys, eta_a, eta_b, policy, symmetric, names, fixed, bounds, m):
    lo = np.array([bounds[v][0] for v in names])
    hi = np.array([bounds[v][1] for v in names])

    def objective(x: np.ndarray, trace: Optional[RestartTrace] = None) -> float:
        x = np.clip(x, lo, hi)
        values = dict(fixed)
        values.update(zip(names, (float(v) for v in x)))
        params = _build_params(eta_a, eta_b, values, m, symmetric)
        if not validate_constraints(params.decoys, params.u_a, params.u_b).ok:
            return _INFEASIBLE
        try:
            raw = key_rate_from_transmittances(sys, eta_a, eta_b, params, policy).rate_raw
        except ValueError:
            return _INFEASIBLE
        if trace is not None:
            trace.evaluations += 1
            best = max(raw, trace.best_so_far[-1]) if trace.best_so_far else raw
            trace.best_so_far.append(best)
        return -raw

    return objective


def _run_restart(args: tuple) -> RestartTrace:
    (sys, eta_a, eta_b, policy, symmetric, names, fixed, bounds, start, maxfev, index, m) = args
    objective = _make_objective(sys, eta_a, eta_b, policy, symmetric, names, fixed, bounds, m)
    trace = RestartTrace(
        index=index, start=dict(zip(names, start)), evaluations=0, best_raw=-math.inf,
        best_so_far=[],
    )
    x0 = np.array(start, dtype=float)
    start_val = objective(x0, trace)
    best_x = x0
    best_val = start_val
    if maxfev >= 2 * (len(names) + 1) and start_val < _INFEASIBLE:
        res = minimize(
            lambda x: objective(x, trace),
            x0,
            method="Nelder-Mead",
            bounds=[bounds[v] for v in names],
            options={"maxfev": maxfev, "xatol": 1e-7, "fatol": 1e-16, "adaptive": True},
        )
        if res.fun < best_val:
            best_val = float(res.fun)
            best_x = np.asarray(res.x, dtype=float)
    trace.best_raw = -best_val
    trace.best_x = [float(v) for v in best_x]
    return trace


def _optimize_core(
    sys: SystemParams,
    eta_a: float,
    eta_b: float,
    spec: OptimizationSpec,
    policy: FluctuationPolicy,
    symmetric: bool,
) -> OptimizationResult:
    names = spec.continuous_free(symmetric)
    fixed = dict(DEFAULT_VALUES)
    fixed.update(spec.defaults)
    m_values: tuple[Optional[int], ...]
    if "m_slices" in spec.free:
        m_values = tuple(spec.m_grid)
    else:
        m_values = (None,)

    lo = np.array([spec.bounds[v][0] for v in names]) if names else np.empty(0)
    hi = np.array([spec.bounds[v][1] for v in names]) if names else np.empty(0)
    if names:
        halton = qmc.Halton(d=len(names), scramble=True, seed=spec.seed)
        unit = halton.random(spec.restarts)
        starts = [lo + u * (hi - lo) for u in unit]
    else:
        starts = [np.empty(0)]
    for extra in spec.extra_starts:
        values = dict(extra)
        starts.append(
            np.clip(np.array([values.get(v, fixed[v]) for v in names]), lo, hi)
        )

    maxfev = spec.budget // len(starts) if starts else 0

    best_trace: Optional[RestartTrace] = None
    best_m: Optional[int] = None
    best_x: Optional[list[float]] = None
    all_traces: list[RestartTrace] = []
    total_evals = 0

    for m in m_values:
        jobs = [
            (sys, eta_a, eta_b, policy, symmetric, names, fixed, spec.bounds,
             [float(v) for v in start], maxfev, i, m)
            for i, start in enumerate(starts)
        ]
        if spec.workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=spec.workers) as pool:
                traces = list(pool.map(_run_restart, jobs, chunksize=1))
        else:
            traces = [_run_restart(job) for job in jobs]
        for trace in traces:
            total_evals += trace.evaluations
            all_traces.append(trace)
            if best_trace is None or trace.best_raw > best_trace.best_raw:
                best_trace = trace
                best_m = m
                best_x = trace.best_x

    if best_trace is None or best_trace.best_raw <= -_INFEASIBLE:
        first = dict(fixed)
        if names:
            first.update(zip(names, (float(v) for v in starts[0])))
        params = _build_params(eta_a, eta_b, first, m_values[0], symmetric)
        report = validate_constraints(params.decoys, params.u_a, params.u_b)
        raise ValueError(
            "no feasible starting point; first start violates: "
            + "; ".join(report.violations)
        )

    values = dict(fixed)
    values.update(zip(names, best_x))
    best_params = _build_params(eta_a, eta_b, values, best_m, symmetric)
    best = key_rate_from_transmittances(sys, eta_a, eta_b, best_params, policy)
    return OptimizationResult(
        best_params=best_params,
        best=best,
        evaluations=total_evals,
        traces=all_traces,
        m_slices=best_params.effective_m(sys),
        symmetric=symmetric,
    )


def optimize(
    sys: SystemParams,
    geom: LinkGeometry,
    spec: OptimizationSpec,
    policy: FluctuationPolicy = FluctuationPolicy.disabled(),
) -> OptimizationResult:
    """Maximize the key rate over the spec's free variables."""
    eta_a, eta_b = arm_transmittances(sys, geom)
    return _optimize_core(sys, eta_a, eta_b, spec, policy, symmetric=False)


def symmetric_baseline(
    sys: SystemParams,
    geom: LinkGeometry,
    spec: OptimizationSpec,
    policy: FluctuationPolicy = FluctuationPolicy.disabled(),
) -> OptimizationResult:
    """Optimize the attenuation-equalized symmetric protocol.

    Extra attenuation brings the short arm down to the long arm's
    transmittance and all per-party knobs are forced equal; this is the
    classic way to run the symmetric protocol over asymmetric links.
    """
    _, eta_b = arm_transmittances(sys, geom)
    return _optimize_core(sys, eta_b, eta_b, spec, policy, symmetric=True)
