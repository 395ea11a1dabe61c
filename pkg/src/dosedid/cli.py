"""Batch command-line surface.

Subcommands bind YAML run configurations to the library:

* ``estimate``  effect curves (plus inference bands) on user panel data,
* ``simulate``  synthetic replication studies with integrated metrics,
* ``placebo``   pre-intervention placebo curves,
* ``truth``     the simulation ground-truth curve table,
* ``validate``  structural checks on a panel file.

All outputs are written into a staging directory that is atomically renamed
to the requested output directory on success, so no partial results ever
appear. A ``run_manifest.json`` (config echo, seed, versions, diagnostics)
accompanies every run and suffices to reproduce it.
"""

from __future__ import annotations

import argparse
import csv
import json
import shutil
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    apply_overrides,
    load_config,
    parse_grid,
    parse_inference,
    parse_scenario,
    parse_schema,
    parse_specs,
)
from .curves import METHODS, EstimatorConfig, estimate_curve, write_curve
from .data import load_panel, pair_periods, validate
from .errors import (
    BandwidthError,
    ConfigError,
    DataParseError,
    DataValidationError,
    DoseDidError,
    EstimationError,
    ExtrapolationError,
    FitError,
    PeriodLookupError,
    SchemaError,
)
from .inference import sandwich_bands, weighted_bootstrap
from .nuisance import default_dose_grid, fit_nuisances
from .panel import placebo_curves
from .simulation import ground_truth_curve, run_permutation_study, run_study

_EXIT_CODES = {
    "config-error": 2,
    "data-error": 3,
    "estimation-error": 4,
    "io-error": 5,
}


def _error_class(exc: Exception) -> str:
    if isinstance(exc, ConfigError):
        return "config-error"
    if isinstance(exc, (SchemaError, DataParseError, DataValidationError, PeriodLookupError)):
        return "data-error"
    if isinstance(exc, (FitError, BandwidthError, ExtrapolationError, EstimationError, DoseDidError)):
        return "estimation-error"
    if isinstance(exc, OSError):
        return "io-error"
    return "estimation-error"


class _Staging:
    """Write outputs into ``<output>.staging``; rename on success."""

    def __init__(self, output: Path, force: bool):
        self.final = Path(output)
        self.force = force
        self.dir = self.final.with_name(self.final.name + ".staging")

    def __enter__(self) -> Path:
        if self.final.exists() and not self.force:
            raise ConfigError(f"output directory already exists: {self.final} (use --force to replace)")
        if self.dir.exists():
            shutil.rmtree(self.dir)
        self.dir.mkdir(parents=True)
        return self.dir

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            if self.final.exists():
                shutil.rmtree(self.final)
            self.dir.rename(self.final)
        else:
            shutil.rmtree(self.dir, ignore_errors=True)
        return False


def _write_manifest(stage: Path, command: str, config: dict, diagnostics: dict, outputs: list):
    manifest = {
        "command": command,
        "config": config,
        "diagnostics": diagnostics,
        "outputs": sorted(outputs),
        "versions": {
            "dosedid": __version__,
            "numpy": np.__version__,
            "python": ".".join(str(v) for v in sys.version_info[:3]),
        },
    }
    path = stage / "run_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str), encoding="utf-8")


def _load_two_period(config: dict, problems: list):
    data_block = config.get("data")
    if not isinstance(data_block, dict) or "path" not in data_block:
        problems.append("data: need a mapping with a 'path'")
        return None, None
    schema = parse_schema(data_block.get("schema", {}), problems)
    if problems:
        return None, None
    panel = load_panel(data_block["path"], schema)
    report = validate(panel)
    if report.fatal:
        raise DataValidationError("; ".join(msg for fatal, msg in report.violations if fatal))
    pairing = config.get("pairing")
    if pairing is None:
        if len(panel.period_labels) != 2:
            raise ConfigError("pairing: required when the panel has more than two periods")
        pre, post = panel.period_labels
    else:
        pre, post = int(pairing["pre"]), int(pairing["post"])
    return panel, pair_periods(panel, pre, post)


def _resolve_grid(grid_req, dataset):
    if isinstance(grid_req, np.ndarray):
        return grid_req
    return default_dose_grid(dataset.dose, size=int(grid_req))


def _maybe_plot(config, stage, name, curve):
    if not config.get("plot"):
        return None
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise ConfigError("plot: true requires matplotlib (install dosedid[plot])") from None
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(curve.grid, curve.psi, label=curve.method)
    if curve.ci_lower is not None:
        ax.fill_between(curve.grid, curve.ci_lower, curve.ci_upper, alpha=0.25)
    ax.axhline(0.0, lw=0.5, color="k")
    ax.set_xlabel("exposure level")
    ax.set_ylabel("effect on the treated")
    ax.legend()
    out = stage / f"{name}.svg"
    fig.savefig(out, format="svg")
    plt.close(fig)
    return out.name


def _cmd_estimate(config: dict, args) -> int:
    problems: list = []
    specs = parse_specs(config.get("nuisance"), problems)
    inference = parse_inference(config.get("inference"), problems)
    grid_req = parse_grid(config, problems)
    methods = config.get("methods", ["MR"])
    bad = [m for m in methods if m not in METHODS]
    if bad:
        problems.append(f"methods: unknown method names {bad}")
    output = config.get("output")
    if not output:
        problems.append("output: required")
    _, dataset = _load_two_period(config, problems)
    if problems:
        raise ConfigError(problems)

    seed = int(config.get("seed", 0))
    bandwidth = config.get("bandwidth")
    grid = _resolve_grid(grid_req, dataset)
    outputs = []
    diagnostics = {}
    with _Staging(Path(output), args.force) as stage:
        for method in methods:
            models = None
            if method == "MR" and inference.wants_sandwich:
                models = fit_nuisances(dataset, specs, dose_grid=grid)
            curve = estimate_curve(
                dataset, method, specs=specs, grid=grid, bandwidth=bandwidth, models=models
            )
            if method == "MR" and inference.method != "none":
                if inference.wants_sandwich:
                    lo, hi, _ = sandwich_bands(dataset, models, curve, mode=inference.mode)
                    sandwich_curve = curve.with_bands(lo, hi)
                    write_curve(sandwich_curve, stage / f"curve_{method}_sandwich.csv")
                    outputs.append(f"curve_{method}_sandwich.csv")
                if inference.wants_bootstrap:
                    est = EstimatorConfig(
                        method=method,
                        specs=specs,
                        grid=grid,
                        bandwidth=None if inference.refit_bandwidth else curve.bandwidth,
                        on_out_of_range="clamp",
                    )
                    boot = weighted_bootstrap(dataset, est, inference.b_replicates, seed)
                    curve = curve.with_bands(boot.ci_lower, boot.ci_upper)
                    diagnostics[f"{method}_bootstrap_failed"] = boot.b_failed
            write_curve(curve, stage / f"curve_{method}.csv")
            outputs.append(f"curve_{method}.csv")
            plot_name = _maybe_plot(config, stage, f"curve_{method}", curve)
            if plot_name:
                outputs.append(plot_name)
            diagnostics[method] = {
                "bandwidth": curve.bandwidth,
                **{k: v for k, v in curve.diagnostics.items() if not isinstance(v, np.ndarray)},
            }
        _write_manifest(stage, "estimate", config, diagnostics, outputs)
    return 0


def _report_rows(report):
    rows = []
    for method, mr in sorted(report.methods.items()):
        rows.append(
            {
                "method": method,
                "misspecified": "+".join(mr.misspecified) or "none",
                "integrated_abs_bias": mr.integrated_abs_bias,
                "integrated_rmse": mr.integrated_rmse,
                "integrated_sd": mr.integrated_sd,
                "failures": mr.failures,
                "flagged": mr.flagged,
                "coverage_sandwich": mr.coverage.get("sandwich", ""),
                "coverage_bootstrap": mr.coverage.get("bootstrap", ""),
                "width_sandwich": mr.mean_width.get("sandwich", ""),
                "width_bootstrap": mr.mean_width.get("bootstrap", ""),
            }
        )
    return rows


def _cmd_simulate(config: dict, args) -> int:
    problems: list = []
    scenario = parse_scenario(config, problems)
    output = config.get("output")
    if not output:
        problems.append("output: required")
    if problems or scenario is None:
        raise ConfigError(problems)

    perms_req = config.get("scenario", {}).get("permutations")
    with _Staging(Path(output), args.force) as stage:
        if perms_req == "all":
            from .simulation import all_permutations

            reports = run_permutation_study(scenario, all_permutations())
        elif perms_req:
            reports = run_permutation_study(scenario, [frozenset(p) for p in perms_req])
        else:
            reports = {tuple(sorted(scenario.misspecified)): run_study(scenario)}

        rows = []
        for key in sorted(reports):
            rows.extend(_report_rows(reports[key]))
        fields = list(rows[0].keys())
        with (stage / "report.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            writer.writerows(rows)
        summary = {
            "scenarios": {
                "+".join(key) or "none": {
                    m: {
                        "integrated_abs_bias": r.integrated_abs_bias,
                        "integrated_rmse": r.integrated_rmse,
                        "integrated_sd": r.integrated_sd,
                        "failures": r.failures,
                        "coverage": r.coverage,
                        "mean_width": r.mean_width,
                    }
                    for m, r in reports[key].methods.items()
                }
                for key in sorted(reports)
            }
        }
        (stage / "summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True), encoding="utf-8"
        )
        _write_manifest(stage, "simulate", config, {}, ["report.csv", "summary.json"])
    return 0


def _cmd_placebo(config: dict, args) -> int:
    problems: list = []
    specs = parse_specs(config.get("nuisance"), problems)
    grid_req = parse_grid(config, problems)
    output = config.get("output")
    if not output:
        problems.append("output: required")
    block = config.get("placebo")
    if not isinstance(block, dict) or "baseline" not in block or "posts" not in block:
        problems.append("placebo: need a mapping with 'baseline' and 'posts'")
    data_block = config.get("data")
    if not isinstance(data_block, dict) or "path" not in data_block:
        problems.append("data: need a mapping with a 'path'")
    schema = parse_schema(data_block.get("schema", {}), problems) if isinstance(data_block, dict) else None
    if problems:
        raise ConfigError(problems)

    panel = load_panel(data_block["path"], schema)
    grid = grid_req if isinstance(grid_req, np.ndarray) else default_dose_grid(panel.dose, size=int(grid_req))
    method = config.get("method", "MR")
    curves = placebo_curves(
        panel,
        baseline=int(block["baseline"]),
        placebo_posts=[int(p) for p in block["posts"]],
        method=method,
        specs=specs,
        intervention_period=(int(block["intervention"]) if "intervention" in block else None),
        grid=grid,
    )
    outputs = []
    with _Staging(Path(output), args.force) as stage:
        for post, curve in zip(block["posts"], curves):
            name = f"placebo_{method}_post{post}.csv"
            write_curve(curve, stage / name)
            outputs.append(name)
        _write_manifest(stage, "placebo", config, {}, outputs)
    return 0


def _cmd_truth(config: dict, args) -> int:
    problems: list = []
    output = config.get("output")
    if not output:
        problems.append("output: required")
    if problems:
        raise ConfigError(problems)
    seed = int(config.get("seed", 0))
    super_n = int(config.get("super_n", 1_000_000))
    grid_size = int(config.get("grid_size", 50))
    truth = ground_truth_curve(seed, super_n, grid_size)
    with _Staging(Path(output), args.force) as stage:
        with (stage / "truth.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["delta", "psi_true", "density_weight"])
            for k in range(truth.grid.shape[0]):
                writer.writerow(
                    [repr(float(truth.grid[k])), repr(float(truth.psi_true[k])), repr(float(truth.density_weights[k]))]
                )
        _write_manifest(stage, "truth", config, {"super_n": super_n, "seed": seed}, ["truth.csv"])
    return 0


def _cmd_validate(config: dict, args) -> int:
    problems: list = []
    data_block = config.get("data")
    if not isinstance(data_block, dict) or "path" not in data_block:
        problems.append("data: need a mapping with a 'path'")
    schema = parse_schema(data_block.get("schema", {}), problems) if isinstance(data_block, dict) else None
    if problems:
        raise ConfigError(problems)
    panel = load_panel(data_block["path"], schema)
    report = validate(panel)
    for line in report.lines():
        print(line)
    output = config.get("output")
    if output:
        with _Staging(Path(output), args.force) as stage:
            (stage / "validation.txt").write_text("\n".join(report.lines()) + "\n", encoding="utf-8")
            _write_manifest(stage, "validate", config, {"fatal": report.fatal}, ["validation.txt"])
    return 0


_COMMANDS = {
    "estimate": _cmd_estimate,
    "simulate": _cmd_simulate,
    "placebo": _cmd_placebo,
    "truth": _cmd_truth,
    "validate": _cmd_validate,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dosedid",
        description="Effect curves for difference-in-differences designs with continuous exposures.",
    )
    parser.add_argument("--version", action="version", version=f"dosedid {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} workflow")
        p.add_argument("-c", "--config", required=True, help="YAML run configuration")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY.PATH=VALUE",
            help="override a scalar config key (repeatable)",
        )
        p.add_argument("--force", action="store_true", help="replace the output directory if present")
        p.add_argument("--workers", type=int, default=None, help="cap parallel workers")
    return parser


def dispatch(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        apply_overrides(config, args.overrides)
        if args.workers is not None:
            config["workers"] = args.workers
        return _COMMANDS[args.command](config, args)
    except Exception as exc:  # single-line machine-readable error class
        cls = _error_class(exc)
        message = " ".join(str(exc).split())
        print(f"dosedid: {cls}: {message}", file=sys.stderr)
        return _EXIT_CODES.get(cls, 1)


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
