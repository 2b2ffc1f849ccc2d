"""Parameter scans over distance and misalignment, plus the scaling fit.

Each grid point runs a full optimization.  Scans chain the previous
point's optimum in as an extra start: for the misalignment scan the
grid is processed from the hardest (largest e_d) point downwards, which
guarantees the reported optima are monotone non-increasing in e_d
because the rate at fixed parameters is.
"""
from __future__ import annotations

import math
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from .channel import LinkGeometry, SystemParams, arm_transmittances
from .config import RunConfig
from .optimizer import OptimizationResult, OptimizationSpec, optimize, symmetric_baseline

SCAN_DISTANCE_COLUMNS = (
    "mode", "delta_l_km", "total_km", "l_a_km", "l_b_km", "rate",
    "u_a", "u_b", "v_b", "w_b", "eps_a", "eps_b", "p_za", "p_zb", "m", "status",
)

SCAN_ED_COLUMNS = (
    "e_d", "rate", "u_a", "u_b", "v_b", "w_b",
    "eps_a", "eps_b", "p_za", "p_zb", "m", "status",
)

SCAN_MODES = ("asym", "sym", "la_zero")


def _carry(result: OptimizationResult) -> tuple[tuple[str, float], ...]:
    p = result.best_params
    return (
        ("u_b", p.u_b),
        ("v_b", p.decoys.v_b),
        ("w_b", p.decoys.w_b),
        ("eps_a", p.eps_a),
        ("eps_b", p.eps_b),
        ("p_za", p.p_za),
        ("p_zb", p.p_zb),
    )


def _result_fields(result: Optional[OptimizationResult]) -> dict:
    if result is None:
        return {k: math.nan for k in ("u_a", "u_b", "v_b", "w_b", "eps_a", "eps_b", "p_za", "p_zb", "m")}
    p = result.best_params
    return {
        "u_a": p.u_a,
        "u_b": p.u_b,
        "v_b": p.decoys.v_b,
        "w_b": p.decoys.w_b,
        "eps_a": p.eps_a,
        "eps_b": p.eps_b,
        "p_za": p.p_za,
        "p_zb": p.p_zb,
        "m": result.m_slices,
    }


def _optimize_point(
    cfg: RunConfig,
    geom: LinkGeometry,
    mode: str,
    spec: OptimizationSpec,
) -> OptimizationResult:
    if mode == "sym":
        return symmetric_baseline(cfg.system, geom, spec, cfg.fluctuation)
    return optimize(cfg.system, geom, spec, cfg.fluctuation)


def _point_geometry(mode: str, delta_l: float, total: float) -> Optional[LinkGeometry]:
    if mode == "la_zero":
        return LinkGeometry(l_a=0.0, l_b=total)
    l_a = 0.5 * (total - delta_l)
    if l_a < 0.0:
        return None
    return LinkGeometry(l_a=l_a, l_b=0.5 * (total + delta_l))


def scan_distance(
    cfg: RunConfig,
    mode: str,
    delta_ls: Sequence[float],
    totals: Sequence[float],
    seed: Optional[int] = None,
    workers: int = 1,
) -> list[dict]:
    """Optimized rate per (delta_l, total distance) grid point."""
    if mode not in SCAN_MODES:
        raise ValueError(f"unknown scan mode {mode!r}")
    spec0 = replace(
        cfg.optimization,
        seed=cfg.optimization.seed if seed is None else seed,
        workers=workers,
    )
    rows: list[dict] = []
    dl_values = [0.0] if mode == "la_zero" else list(delta_ls)
    for dl in dl_values:
        carry: Optional[tuple] = None
        for total in sorted(totals):
            geom = _point_geometry(mode, dl, total)
            row = {
                "mode": mode,
                "delta_l_km": total if mode == "la_zero" else dl,
                "total_km": total,
                "l_a_km": geom.l_a if geom else math.nan,
                "l_b_km": geom.l_b if geom else math.nan,
                "rate": 0.0,
                "status": "ok",
            }
            if geom is None:
                row.update(_result_fields(None))
                row["status"] = "infeasible_geometry"
                rows.append(row)
                continue
            spec = spec0 if carry is None else replace(
                spec0, extra_starts=spec0.extra_starts + (carry,)
            )
            try:
                result = _optimize_point(cfg, geom, mode, spec)
            except ValueError as exc:
                row.update(_result_fields(None))
                row["status"] = f"error: {exc}"
                rows.append(row)
                continue
            row.update(_result_fields(result))
            row["rate"] = result.best.rate
            rows.append(row)
            carry = _carry(result)
    return rows


def scan_ed(
    cfg: RunConfig,
    e_d_grid: Sequence[float],
    seed: Optional[int] = None,
    workers: int = 1,
) -> list[dict]:
    """Optimized rate per misalignment value at the config geometry.

    Processed from the largest e_d down, carrying each optimum into the
    next (easier) point, so the emitted rates never increase with e_d.
    """
    spec0 = replace(
        cfg.optimization,
        seed=cfg.optimization.seed if seed is None else seed,
        workers=workers,
    )
    rows_desc: list[dict] = []
    carry: Optional[tuple] = None
    for e_d in sorted(set(e_d_grid), reverse=True):
        sys = replace(cfg.system, e_d=e_d)
        row = {"e_d": e_d, "rate": 0.0, "status": "ok"}
        spec = spec0 if carry is None else replace(
            spec0, extra_starts=spec0.extra_starts + (carry,)
        )
        try:
            result = optimize(sys, cfg.geometry, spec, cfg.fluctuation)
        except ValueError as exc:
            row.update(_result_fields(None))
            row["status"] = f"error: {exc}"
            rows_desc.append(row)
            continue
        row.update(_result_fields(result))
        row["rate"] = result.best.rate
        rows_desc.append(row)
        carry = _carry(result)
    return rows_desc[::-1]


def fit_sigma(
    cfg: RunConfig,
    mode: str,
    delta_l: float,
    totals: Sequence[float],
    seed: Optional[int] = None,
    workers: int = 1,
) -> dict:
    """Least-squares scaling exponent of rate against total transmittance.

    Fits log R against log(eta_a * eta_b) over the grid points with
    positive optimized rate; requires at least five of them.
    """
    rows = scan_distance(cfg, mode, [delta_l], totals, seed=seed, workers=workers)
    xs, ys = [], []
    for row in rows:
        if row["status"] != "ok" or row["rate"] <= 0.0:
            continue
        geom = LinkGeometry(l_a=row["l_a_km"], l_b=row["l_b_km"])
        eta_a, eta_b = arm_transmittances(cfg.system, geom)
        xs.append(math.log(eta_a * eta_b))
        ys.append(math.log(row["rate"]))
    if len(xs) < 5:
        raise ValueError(
            f"need >= 5 positive-rate grid points for the fit, got {len(xs)}"
        )
    slope, intercept = np.polyfit(np.array(xs), np.array(ys), 1)
    residuals = np.array(ys) - (slope * np.array(xs) + intercept)
    return {
        "sigma": float(slope),
        "intercept": float(intercept),
        "residual_rms": float(np.sqrt(np.mean(residuals**2))),
        "n_points": len(xs),
        "mode": mode,
        "delta_l_km": delta_l,
        "rows": rows,
    }
