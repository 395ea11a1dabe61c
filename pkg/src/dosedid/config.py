"""Run-configuration parsing and validation for the batch CLI.

Configs are YAML files (key/value with nested sections), one per run.
``--set a.b.c=value`` command-line overrides replace scalar keys before
validation. Validation collects *every* problem before failing so a broken
config surfaces all its issues at once.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import yaml

from .data import PanelSchema
from .errors import ConfigError
from .nuisance import NuisanceSpec, default_specs
from .simulation import InferenceConfig, ScenarioConfig

__all__ = ["load_config", "apply_overrides", "parse_schema", "parse_specs", "parse_scenario", "parse_inference"]

_METHOD_NAMES = ("MR", "MR_PARAMETRIC", "OR", "IPW", "NAIVE", "TWFE")


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"config parse failure: {exc}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    return raw


def apply_overrides(config: dict, overrides) -> dict:
    """Apply ``key.path=value`` overrides; values parse as YAML scalars."""
    problems = []
    for item in overrides:
        if "=" not in item:
            problems.append(f"override {item!r} is not key=value")
            continue
        key, _, value = item.partition("=")
        node = config
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                problems.append(f"override {key!r} crosses a non-mapping node")
                break
        else:
            node[parts[-1]] = yaml.safe_load(value)
    if problems:
        raise ConfigError(problems)
    return config


def parse_schema(block: dict, problems: list) -> PanelSchema | None:
    try:
        return PanelSchema.from_dict(block)
    except Exception as exc:
        problems.append(f"data.schema: {exc}")
        return None


def parse_specs(block: dict | None, problems: list) -> dict[str, NuisanceSpec]:
    """Build the nuisance spec set; absent blocks fall back to defaults."""
    specs = default_specs()
    if not block:
        return specs
    out = dict(specs)
    for name, sub in block.items():
        if name not in ("pi_a", "pi_d", "mu1", "mu0"):
            problems.append(f"nuisance.{name}: unknown model name")
            continue
        if not isinstance(sub, dict):
            problems.append(f"nuisance.{name}: expected a mapping")
            continue
        kwargs = {"which": name}
        for key in ("learner", "covariate_map", "kde_bandwidth"):
            if key in sub:
                kwargs[key] = sub[key]
        if name == "mu1":
            if "dose_powers" in sub:
                kwargs["dose_powers"] = tuple(int(p) for p in sub["dose_powers"])
            if "dose_interactions" in sub:
                kwargs["dose_interactions"] = tuple(int(j) for j in sub["dose_interactions"])
        if name == "pi_a" and "learner" not in kwargs:
            kwargs["learner"] = "logistic"
        try:
            out[name] = NuisanceSpec(**kwargs)
        except (TypeError, ValueError) as exc:
            problems.append(f"nuisance.{name}: {exc}")
    return out


def parse_inference(block: dict | None, problems: list) -> InferenceConfig:
    if not block:
        return InferenceConfig()
    try:
        return InferenceConfig(
            method=str(block.get("method", "none")),
            b_replicates=int(block.get("B", block.get("b_replicates", 200))),
            mode=str(block.get("mode", "base")),
            refit_bandwidth=bool(block.get("refit_bandwidth", False)),
        )
    except (TypeError, ValueError) as exc:
        problems.append(f"inference: {exc}")
        return InferenceConfig()


def parse_scenario(config: dict, problems: list) -> ScenarioConfig | None:
    block = config.get("scenario")
    if not isinstance(block, dict):
        problems.append("scenario: missing or not a mapping")
        return None
    inference = parse_inference(config.get("inference"), problems)
    methods = config.get("methods", ["MR"])
    bad = [m for m in methods if m not in _METHOD_NAMES]
    if bad:
        problems.append(f"methods: unknown method names {bad}")
    try:
        return ScenarioConfig(
            n=int(block["n"]),
            replicates=int(block.get("replicates", 200)),
            misspecified=frozenset(block.get("misspecified", [])),
            seed=int(config.get("seed", 0)),
            methods=tuple(methods),
            grid_size=int(block.get("grid_size", 50)),
            super_n=int(block.get("super_n", 1_000_000)),
            inference=inference,
            workers=int(config.get("workers", os.cpu_count() or 1)),
            keep_curves=bool(block.get("keep_curves", False)),
            mu1_dose_powers=tuple(block.get("mu1_dose_powers", (1, 3))),
            mu1_dose_interactions=tuple(block.get("mu1_dose_interactions", (0, 2))),
        )
    except (KeyError, TypeError, ValueError) as exc:
        problems.append(f"scenario: {exc!r}")
        return None


def parse_grid(config: dict, problems: list):
    """Grid request: an explicit ndarray of points, or an int size for the
    default percentile rule."""
    block = config.get("grid")
    if block is None:
        return 50
    if isinstance(block, dict):
        try:
            if "points" in block:
                return np.asarray([float(v) for v in block["points"]], dtype=float)
            size = int(block.get("size", 50))
            lo = block.get("lo")
            hi = block.get("hi")
            if lo is not None and hi is not None:
                return np.linspace(float(lo), float(hi), size)
            return size
        except (TypeError, ValueError) as exc:
            problems.append(f"grid: {exc}")
            return 50
    problems.append("grid: expected a mapping")
    return 50
