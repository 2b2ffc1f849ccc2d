"""Command-line driver.

Subcommands: rate, scan-distance, scan-ed, optimize, fit-sigma,
validate.  Machine-readable output goes to --out (or stdout) as CSV or
JSON with locale-independent formatting and no timestamps, so runs with
identical seeds are byte-identical.
"""
from __future__ import annotations

import argparse
import json
import math
import sys as _sys
from dataclasses import replace
from typing import Optional, Sequence

from .channel import arm_transmittances
from .config import ConfigError, RunConfig, load_config, parse_config
from .keyrate import key_rate
from .optimizer import optimize as run_optimize
from .scans import (
    SCAN_DISTANCE_COLUMNS,
    SCAN_ED_COLUMNS,
    fit_sigma,
    scan_distance,
    scan_ed,
)
from .validation import run_validation


def _parse_grid(spec: str) -> list[float]:
    """Grid syntax: 'a,b,c' or 'start:stop:step' (stop inclusive)."""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid range must be start:stop:step, got {spec!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("grid step must be > 0")
        values = []
        v = start
        while v <= stop + 1e-9:
            values.append(round(v, 9))
            v += step
        return values
    return [float(p) for p in spec.split(",") if p.strip()]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _sanitize(obj):
    """Make a document JSON-clean: tuples to lists, NaN to null."""
    if isinstance(obj, float):
        return None if math.isnan(obj) else obj
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


def _rows_to_csv(rows: list[dict], columns: Sequence[str]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(c)) for c in columns))
    return "\n".join(lines) + "\n"


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    else:
        _sys.stdout.write(text)


def _emit_rows(rows: list[dict], columns: Sequence[str], fmt: str, out: Optional[str]) -> None:
    if fmt == "csv":
        _emit(_rows_to_csv(rows, columns), out)
    else:
        _emit(json.dumps(_sanitize(rows), indent=2, sort_keys=True) + "\n", out)


def _emit_doc(doc: dict, fmt: str, out: Optional[str]) -> None:
    del fmt  # single documents are always JSON
    _emit(json.dumps(_sanitize(doc), indent=2, sort_keys=True) + "\n", out)


def _load(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else parse_config()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, optimization=replace(cfg.optimization, seed=args.seed))
    return cfg


def _params_dict(params) -> dict:
    return {
        "p_za": params.p_za,
        "p_zb": params.p_zb,
        "eps_a": params.eps_a,
        "eps_b": params.eps_b,
        "u_a": params.u_a,
        "u_b": params.u_b,
        "v_a": params.decoys.v_a,
        "v_b": params.decoys.v_b,
        "w_a": params.decoys.w_a,
        "w_b": params.decoys.w_b,
        "m_slices": params.m_slices,
    }


def cmd_rate(args: argparse.Namespace) -> int:
    cfg = _load(args)
    eta_a, eta_b = arm_transmittances(cfg.system, cfg.geometry)
    params = cfg.protocol_params(eta_a, eta_b)
    breakdown = key_rate(cfg.system, cfg.geometry, params, cfg.fluctuation)
    print(
        f"rate {breakdown.rate:.6g} /pulse at L_a={cfg.geometry.l_a:g} km, "
        f"L_b={cfg.geometry.l_b:g} km (Y1_L={breakdown.y1_low:.6g}, "
        f"e1_U={'-' if breakdown.e1_up is None else f'{breakdown.e1_up:.6g}'})"
    )
    doc = {
        "geometry": {"l_a_km": cfg.geometry.l_a, "l_b_km": cfg.geometry.l_b},
        "params": _params_dict(params),
        "breakdown": breakdown.to_dict(),
    }
    _emit_doc(doc, args.format, args.out)
    return 0


def cmd_optimize(args: argparse.Namespace) -> int:
    cfg = _load(args)
    spec = replace(cfg.optimization, workers=args.workers)
    result = run_optimize(cfg.system, cfg.geometry, spec, cfg.fluctuation)
    print(
        f"optimized rate {result.best.rate:.6g} /pulse "
        f"({result.evaluations} evaluations, M={result.m_slices})"
    )
    doc = {
        "rate": result.best.rate,
        "m_slices": result.m_slices,
        "evaluations": result.evaluations,
        "params": _params_dict(result.best_params),
        "breakdown": result.best.to_dict(),
        "restarts": [
            {"index": t.index, "best_raw": t.best_raw, "evaluations": t.evaluations}
            for t in result.traces
        ],
    }
    _emit_doc(doc, args.format, args.out)
    return 0


def cmd_scan_distance(args: argparse.Namespace) -> int:
    cfg = _load(args)
    mode = args.mode.replace("-", "_")
    delta_ls = _parse_grid(args.delta_l) if args.delta_l else [0.0]
    totals = _parse_grid(args.grid)
    rows = scan_distance(cfg, mode, delta_ls, totals, seed=args.seed, workers=args.workers)
    _emit_rows(rows, SCAN_DISTANCE_COLUMNS, args.format, args.out)
    hard_failures = [r for r in rows if r["status"].startswith("error")]
    return 1 if hard_failures else 0


def cmd_scan_ed(args: argparse.Namespace) -> int:
    cfg = _load(args)
    grid = _parse_grid(args.grid)
    if any(not 0.0 <= v < 0.5 for v in grid):
        raise ConfigError("e_d grid values must lie in [0, 0.5)")
    rows = scan_ed(cfg, grid, seed=args.seed, workers=args.workers)
    _emit_rows(rows, SCAN_ED_COLUMNS, args.format, args.out)
    hard_failures = [r for r in rows if r["status"].startswith("error")]
    return 1 if hard_failures else 0


def cmd_fit_sigma(args: argparse.Namespace) -> int:
    cfg = _load(args)
    mode = args.mode.replace("-", "_")
    delta_ls = _parse_grid(args.delta_l) if args.delta_l else [0.0]
    if len(delta_ls) != 1:
        raise ConfigError("fit-sigma takes exactly one --delta-l value")
    totals = _parse_grid(args.grid)
    try:
        fit = fit_sigma(cfg, mode, delta_ls[0], totals, seed=args.seed, workers=args.workers)
    except ValueError as exc:
        print(f"fit-sigma failed: {exc}", file=_sys.stderr)
        return 1
    print(
        f"sigma {fit['sigma']:.4f} (residual rms {fit['residual_rms']:.3g}, "
        f"{fit['n_points']} points, mode={mode})"
    )
    _emit_doc(fit, args.format, args.out)
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    cfg = _load(args)
    eta_a, eta_b = arm_transmittances(cfg.system, cfg.geometry)
    params = cfg.protocol_params(eta_a, eta_b)
    seed = args.seed if args.seed is not None else 0
    report = run_validation(
        cfg.system, cfg.geometry, params, n_trials=args.trials,
        seed=seed, workers=args.workers,
    )
    for row in report.rows:
        if row.note and not row.note == "one_sided":
            print(f"{row.name:28s} skipped ({row.note})")
            continue
        status = "pass" if row.passed else "FAIL"
        print(
            f"{row.name:28s} expected {row.expected:.6g} observed {row.observed:.6g} "
            f"({row.distance:+.2f} sigma) {status}"
        )
    doc = {"n_trials": args.trials, "seed": seed, **report.to_dict()}
    _emit_doc(doc, args.format, args.out)
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snsqkd",
        description="Key-rate analysis for sending-or-not-sending twin-field QKD "
        "over asymmetric channels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, fmt_default: str) -> None:
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int, default=None, help="seed override (default 0 / config)")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default=fmt_default)
        p.add_argument("--workers", type=int, default=1, help="parallel workers")

    p = sub.add_parser("rate", help="evaluate the key rate at one parameter point")
    common(p, "json")
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("optimize", help="optimize protocol parameters at the config geometry")
    common(p, "json")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("scan-distance", help="optimized rate over a total-distance grid")
    common(p, "csv")
    p.add_argument("--mode", choices=("asym", "sym", "la-zero"), default="asym")
    p.add_argument("--delta-l", help="comma list of L_b - L_a values in km")
    p.add_argument("--grid", required=True, help="total distances: 'a,b,c' or 'start:stop:step'")
    p.set_defaults(func=cmd_scan_distance)

    p = sub.add_parser("scan-ed", help="optimized rate over a misalignment grid")
    common(p, "csv")
    p.add_argument("--grid", required=True, help="e_d values: 'a,b,c' or 'start:stop:step'")
    p.set_defaults(func=cmd_scan_ed)

    p = sub.add_parser("fit-sigma", help="fit the rate-vs-transmittance scaling exponent")
    common(p, "json")
    p.add_argument("--mode", choices=("asym", "sym", "la-zero"), default="asym")
    p.add_argument("--delta-l", help="single L_b - L_a value in km")
    p.add_argument("--grid", required=True, help="total distances for the fit")
    p.set_defaults(func=cmd_fit_sigma)

    p = sub.add_parser("validate", help="Monte Carlo cross-validation of the analytic model")
    common(p, "json")
    p.add_argument("--trials", type=int, default=10**6, help="number of simulated pulses")
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=_sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
