"""Run configuration: a strict-keyed JSON document with full defaults.

Every key is overridable and unknown keys are rejected with their
dotted path, so typos fail loudly instead of silently running the
defaults.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Optional

from .channel import LinkGeometry, SystemParams
from .decoy import DecoySettings, FluctuationPolicy
from .keyrate import ProtocolParams
from .optimizer import (
    DEFAULT_BOUNDS,
    DEFAULT_M_GRID,
    DEFAULT_VALUES,
    OptimizationSpec,
)


class ConfigError(ValueError):
    """Invalid or malformed run configuration."""


DEFAULT_CONFIG: dict[str, Any] = {
    "system": {
        "eta_d": 0.5,
        "p_d": 1e-10,
        "e_d": 0.15,
        "alpha_db": 0.2,
        "f_ec": 1.1,
        "n_pulses": 1e12,
        "m_slices": 16,
    },
    "geometry": {
        "l_a_km": 50.0,
        "l_b_km": 150.0,
    },
    "protocol": {
        "p_za": 0.7,
        "p_zb": 0.7,
        "eps_a": 0.02,
        "eps_b": 0.30,
        "u_b": 0.45,
        "v_b": 0.10,
        "w_b": 0.02,
        # None means "derive from intensity matching" (k1 = eta_b / eta_a).
        "u_a": None,
        "v_a": None,
        "w_a": None,
        "m_slices": None,
    },
    "fluctuation": {
        "enabled": True,
        "failure_prob": 1e-7,
    },
    "optimization": {
        "free": ["u_b", "v_b", "w_b", "eps_a", "eps_b", "p_za", "p_zb"],
        "bounds": {k: list(v) for k, v in DEFAULT_BOUNDS.items()},
        "defaults": dict(DEFAULT_VALUES),
        "restarts": 16,
        "budget": 4000,
        "seed": 0,
        "m_grid": list(DEFAULT_M_GRID),
        "workers": 1,
    },
}


def _merge_strict(defaults: dict, overrides: dict, path: str = "") -> dict:
    merged = dict(defaults)
    for key, value in overrides.items():
        dotted = f"{path}{key}"
        if key not in defaults:
            raise ConfigError(f"unknown configuration key: {dotted!r}")
        base = defaults[key]
        if isinstance(base, dict) and isinstance(value, dict):
            # bounds maps variable names to [lo, hi]; accept partial overrides
            if key == "bounds":
                merged[key] = {**base, **value}
            else:
                merged[key] = _merge_strict(base, value, path=f"{dotted}.")
        else:
            merged[key] = value
    return merged


@dataclass(frozen=True)
class RunConfig:
    system: SystemParams
    geometry: LinkGeometry
    protocol: dict
    fluctuation: FluctuationPolicy
    optimization: OptimizationSpec

    def protocol_params(self, eta_a: float, eta_b: float) -> ProtocolParams:
        """Resolve the protocol section, deriving Alice's tied intensities."""
        raw = self.protocol
        k1 = eta_b / eta_a
        u_a = raw["u_a"] if raw["u_a"] is not None else k1 * raw["u_b"]
        v_a = raw["v_a"] if raw["v_a"] is not None else k1 * raw["v_b"]
        w_a = raw["w_a"] if raw["w_a"] is not None else k1 * raw["w_b"]
        return ProtocolParams(
            p_za=raw["p_za"],
            p_zb=raw["p_zb"],
            eps_a=raw["eps_a"],
            eps_b=raw["eps_b"],
            u_a=u_a,
            u_b=raw["u_b"],
            decoys=DecoySettings(v_a=v_a, v_b=raw["v_b"], w_a=w_a, w_b=raw["w_b"]),
            m_slices=raw["m_slices"],
        )


def parse_config(document: Optional[dict] = None) -> RunConfig:
    """Build a RunConfig from a (possibly partial) configuration dict."""
    merged = _merge_strict(DEFAULT_CONFIG, document or {})
    try:
        system = SystemParams(**merged["system"])
        geometry = LinkGeometry(
            l_a=merged["geometry"]["l_a_km"], l_b=merged["geometry"]["l_b_km"]
        )
        fluctuation = FluctuationPolicy(**merged["fluctuation"])
        opt = merged["optimization"]
        optimization = OptimizationSpec(
            free=tuple(opt["free"]),
            bounds={k: (float(v[0]), float(v[1])) for k, v in opt["bounds"].items()},
            defaults={k: float(v) for k, v in opt["defaults"].items()},
            restarts=int(opt["restarts"]),
            budget=int(opt["budget"]),
            seed=int(opt["seed"]),
            m_grid=tuple(int(m) for m in opt["m_grid"]),
            workers=int(opt["workers"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(
        system=system,
        geometry=geometry,
        protocol=merged["protocol"],
        fluctuation=fluctuation,
        optimization=optimization,
    )


def load_config(path: str) -> RunConfig:
    """Parse a JSON configuration file."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"malformed JSON in {path!r} at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(document, dict):
        raise ConfigError(f"config root must be an object, got {type(document).__name__}")
    return parse_config(document)
