"""Repeated-observation-time workflows.

With M calendar-matched (pre, post) period pairs, per-pair effect curves
are estimated on a shared dose grid (the exposure is time-invariant, so the
grid is computed once) with nuisance functions refit separately for each
pair, then averaged pointwise. Bootstrap uncertainty resamples units once
per replicate and reuses the same unit weights across all pairs, which is
what accounts for within-unit correlation over time; sandwich uncertainty
stacks the per-pair estimating systems.

Placebo analyses re-run the same machinery on pairs of pre-intervention
periods, where the true effect curve is known to be zero.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .curves import EffectCurveEstimate, estimate_curve
from .data import PanelDataset, pair_periods
from .errors import DataValidationError, DoseDidError, EstimationError
from .inference import Z_95, bootstrap_weights, stacked_sandwich_variance
from .nuisance import NuisanceSpec, default_dose_grid, fit_nuisances

__all__ = [
    "RepeatedEstimate",
    "estimate_repeated",
    "placebo_curves",
    "scale_outcomes",
]


@dataclass(frozen=True)
class RepeatedEstimate:
    """Per-pair curves on a shared grid plus their pointwise average."""

    per_m: tuple[EffectCurveEstimate, ...]
    averaged: EffectCurveEstimate

    @property
    def pair_count(self) -> int:
        return len(self.per_m)


def _average_curves(per_m: list[EffectCurveEstimate]) -> EffectCurveEstimate:
    psi = np.mean([c.psi for c in per_m], axis=0)
    theta = np.mean([c.theta_curve for c in per_m], axis=0)
    theta0 = float(np.mean([c.theta0 for c in per_m]))
    return EffectCurveEstimate(
        method=per_m[0].method,
        grid=per_m[0].grid,
        psi=psi,
        theta_curve=theta,
        theta0=theta0,
        bandwidth=None,
        diagnostics={"pair_count": len(per_m)},
    )


def estimate_repeated(
    data: PanelDataset,
    pairs,
    method: str,
    specs: dict[str, NuisanceSpec] | None = None,
    grid: np.ndarray | None = None,
    bandwidth: float | None = None,
    inference: str = "none",  # none | bootstrap | sandwich
    b_replicates: int = 200,
    seed: int = 0,
) -> RepeatedEstimate:
    """Estimate one curve per (pre, post) pair and their average.

    Nuisance models are refit for every pair. With ``inference="bootstrap"``
    each replicate draws one weight per unit and reuses it across all pairs;
    with ``inference="sandwich"`` (MR only) the per-pair estimating systems
    are stacked to give normal-approximation bands for the average.
    """
    pairs = [tuple(p) for p in pairs]
    if not pairs:
        raise EstimationError("need at least one period pair")
    if grid is None:
        grid = default_dose_grid(data.dose)
    grid = np.asarray(grid, dtype=float)

    datasets = [pair_periods(data, pre, post) for pre, post in pairs]
    per_m: list[EffectCurveEstimate] = []
    model_sets = []
    for ds in datasets:
        models = None
        if method == "MR" and inference == "sandwich":
            models = fit_nuisances(ds, specs, dose_grid=grid)
        curve = estimate_curve(ds, method, specs=specs, grid=grid, bandwidth=bandwidth, models=models)
        per_m.append(curve)
        model_sets.append(models)
    averaged = _average_curves(per_m)

    if inference == "bootstrap":
        per_m, averaged = _bootstrap_repeated(
            data, datasets, per_m, averaged, method, specs, grid, b_replicates, seed
        )
    elif inference == "sandwich":
        if method != "MR":
            raise EstimationError("stacked sandwich inference is available for the MR method only")
        variances = np.empty(grid.shape[0])
        systems = list(zip(datasets, model_sets, per_m))
        for k, delta in enumerate(grid):
            variances[k] = stacked_sandwich_variance(systems, float(delta))
        half = Z_95 * np.sqrt(variances)
        averaged = averaged.with_bands(averaged.psi - half, averaged.psi + half)
    elif inference != "none":
        raise EstimationError(f"unknown inference choice {inference!r}")

    return RepeatedEstimate(per_m=tuple(per_m), averaged=averaged)


def _bootstrap_repeated(data, datasets, per_m, averaged, method, specs, grid, b_replicates, seed):
    """Unit-weighted bootstrap with weights shared across period pairs."""
    if b_replicates < 2:
        raise EstimationError("bootstrap needs at least 2 replicates")
    n_pairs = len(datasets)
    avg_rows = []
    per_rows = [[] for _ in range(n_pairs)]
    failed = 0
    for b in range(b_replicates):
        w = bootstrap_weights(data.a, seed, b)
        try:
            psis = []
            for ds, point in zip(datasets, per_m):
                curve = estimate_curve(
                    ds,
                    method,
                    specs=specs,
                    grid=grid,
                    bandwidth=point.bandwidth,
                    sample_weight=w,
                    on_out_of_range="clamp",
                )
                psis.append(curve.psi)
        except DoseDidError:
            failed += 1
            continue
        for m, psi in enumerate(psis):
            per_rows[m].append(psi)
        avg_rows.append(np.mean(psis, axis=0))
    if not avg_rows:
        raise EstimationError("every bootstrap replicate failed")
    lo, hi = np.percentile(np.vstack(avg_rows), [2.5, 97.5], axis=0)
    averaged = averaged.with_bands(lo, hi)
    averaged = replace(
        averaged,
        diagnostics={**averaged.diagnostics, "bootstrap_failed": failed, "bootstrap_b": b_replicates},
    )
    out_per_m = []
    for m, curve in enumerate(per_m):
        lo_m, hi_m = np.percentile(np.vstack(per_rows[m]), [2.5, 97.5], axis=0)
        out_per_m.append(curve.with_bands(lo_m, hi_m))
    return out_per_m, averaged


def placebo_curves(
    data: PanelDataset,
    baseline: int,
    placebo_posts,
    method: str,
    specs: dict[str, NuisanceSpec] | None = None,
    intervention_period: int | None = None,
    grid: np.ndarray | None = None,
    bandwidth: float | None = None,
) -> list[EffectCurveEstimate]:
    """Effect curves for pre-intervention period pairs (known truth: zero).

    Each placebo post period is paired with the baseline period and run
    through the ordinary estimator. When ``intervention_period`` is given,
    any index at or after it is rejected.
    """
    posts = [int(p) for p in placebo_posts]
    if int(baseline) in posts:
        raise DataValidationError("baseline period cannot also be a placebo post period")
    if intervention_period is not None:
        offenders = [p for p in (baseline, *posts) if p >= intervention_period]
        if offenders:
            raise DataValidationError(
                f"placebo periods must precede the intervention ({intervention_period}): {offenders}"
            )
    if grid is None:
        grid = default_dose_grid(data.dose)
    out = []
    for post in posts:
        ds = pair_periods(data, baseline, post)
        out.append(estimate_curve(ds, method, specs=specs, grid=grid, bandwidth=bandwidth))
    return out


def scale_outcomes(data: PanelDataset, baseline_periods) -> PanelDataset:
    """Divide every unit's outcomes by its mean outcome over the given
    periods (e.g. pre-intervention volume normalization)."""
    cols = []
    for m in baseline_periods:
        try:
            cols.append(data.period_labels.index(int(m)))
        except ValueError:
            raise DataValidationError(f"unknown baseline period {m!r}") from None
    scale = data.y[:, cols].mean(axis=1)
    zero = np.isclose(scale, 0.0)
    if np.any(zero):
        bad = data.ids[int(np.nonzero(zero)[0][0])]
        raise DataValidationError(f"unit {bad!r} has zero baseline mean; cannot scale outcomes")
    return PanelDataset(
        ids=data.ids,
        x=data.x,
        a=data.a,
        dose=data.dose,
        y=data.y / scale[:, None],
        period_labels=data.period_labels,
        covariate_names=data.covariate_names,
    )
