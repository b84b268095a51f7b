"""Layered CLI configuration: defaults <- config file <- flags, with
per-field provenance recorded into every output."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from fractions import Fraction

from .clustering import ClusterParams
from .cpm import CpmSizeModel
from .errors import ConfigError
from .geometry import FootprintDims
from .metrics import ShapeSizeModel
from .simulator import GENERATION_MODES, POLICIES, SimConfig

ENV_CONFIG = "VRUCP_CONFIG"

DEFAULTS = {
    "e": 1.5,
    "r": 0.7,
    "min_pts": 2,
    "rate": 2.0,
    "policies": list(POLICIES),
    "mode": "compulsory",
    "seed": 0,
    "footprint_width": 0.5,
    "footprint_depth": 0.3,
    "base_bytes": 60.0,
    "vru_object_bytes": 35.0,
    "cluster_object_base_bytes": 29.0,
    "containment": "center",
    "mvee_tolerance": 1e-4,
    "generation": "fixed",
}

_COERCE = {
    "e": float, "r": float, "min_pts": int, "rate": float, "seed": int,
    "footprint_width": float, "footprint_depth": float,
    "base_bytes": float, "vru_object_bytes": float, "cluster_object_base_bytes": float,
    "mvee_tolerance": float, "mode": str, "containment": str, "generation": str,
}


def _coerce(key: str, value):
    if key == "policies":
        if isinstance(value, str):
            value = [p.strip() for p in value.split(",") if p.strip()]
        return list(value)
    fn = _COERCE.get(key)
    try:
        return fn(value) if fn else value
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config field {key!r}: cannot interpret {value!r}") from exc


@dataclass
class ResolvedConfig:
    """Final configuration values plus the layer each one came from."""

    values: dict
    sources: dict

    def provenance(self) -> dict:
        return {key: {"value": self.values[key], "source": self.sources[key]}
                for key in sorted(self.values)}

    def cluster_params(self) -> ClusterParams:
        return ClusterParams(e=self.values["e"], r=self.values["r"],
                             min_pts=self.values["min_pts"])

    def dims(self) -> FootprintDims:
        return FootprintDims(width=self.values["footprint_width"],
                             depth=self.values["footprint_depth"])

    def size_model(self) -> CpmSizeModel:
        return CpmSizeModel(
            base_bytes=Fraction(self.values["base_bytes"]).limit_denominator(10**6),
            vru_object_bytes=Fraction(self.values["vru_object_bytes"]).limit_denominator(10**6),
            cluster_object_base_bytes=Fraction(
                self.values["cluster_object_base_bytes"]).limit_denominator(10**6),
            shape_model=ShapeSizeModel(),
            mode=self.values["mode"],
        )

    def sim_config(self) -> SimConfig:
        return SimConfig(
            params=self.cluster_params(),
            policies=tuple(self.values["policies"]),
            size_model=self.size_model(),
            rate=self.values["rate"],
            dims=self.dims(),
            seed=self.values["seed"],
            containment=self.values["containment"],
            mvee_tolerance=self.values["mvee_tolerance"],
            generation=self.values["generation"],
        )


def resolve_config(config_path=None, flag_values=None) -> ResolvedConfig:
    """Merge defaults, then the config file (--config or $VRUCP_CONFIG),
    then explicitly passed flags. Unknown file keys are rejected."""
    values = dict(DEFAULTS)
    sources = {key: "default" for key in DEFAULTS}

    path = config_path or os.environ.get(ENV_CONFIG)
    if path:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        unknown = sorted(set(file_cfg) - set(DEFAULTS) - {"scenario"})
        if unknown:
            raise ConfigError(f"config file {path} has unknown fields: {unknown}")
        for key, value in file_cfg.items():
            if key == "scenario":
                values["scenario"] = value
                sources["scenario"] = "file"
                continue
            values[key] = _coerce(key, value)
            sources[key] = "file"

    for key, value in (flag_values or {}).items():
        if value is None:
            continue
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config flag: {key}")
        values[key] = _coerce(key, value)
        sources[key] = "flag"

    _validate(values)
    return ResolvedConfig(values, sources)


def _validate(values: dict) -> None:
    if values["mode"] not in ("full", "compulsory"):
        raise ConfigError(f"mode must be 'full' or 'compulsory', got {values['mode']!r}")
    if values["containment"] not in ("center", "footprint"):
        raise ConfigError(f"containment must be 'center' or 'footprint', got {values['containment']!r}")
    if values["generation"] not in GENERATION_MODES:
        raise ConfigError(f"generation must be one of {GENERATION_MODES}, got {values['generation']!r}")
    bad = [p for p in values["policies"] if p not in POLICIES]
    if bad:
        raise ConfigError(f"unknown policies {bad}; valid: {list(POLICIES)}")
    if not values["policies"]:
        raise ConfigError("at least one policy is required")
