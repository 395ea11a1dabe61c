"""Effect-curve estimation on a common dose grid.

Six estimators of the dose-specific intervention effect on the treated,
Psi(delta), all returning an EffectCurveEstimate:

* ``MR``            influence-function pseudo-outcomes regressed on dose by
                    a local linear Epanechnikov smoother, minus the
                    control-side component (multiply robust).
* ``MR_PARAMETRIC`` same pseudo-outcomes, but a parametric polynomial dose
                    regression in place of the kernel smoother.
* ``OR``            pure outcome-regression contrast of mu1 and mu0 averaged
                    over treated covariates.
* ``IPW``           pure weighting estimator: dose-density weights on the
                    treated side, treatment-odds weights on the control side.
* ``NAIVE``         confounding-naive kernel regression of raw trends minus
                    the unadjusted control trend mean.
* ``TWFE``          pooled two-way fixed effects regression with a linear
                    dose interaction.

Every fit accepts optional per-unit weights, which is how the weighted
bootstrap threads resampling through the whole pipeline.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import TwoPeriodDataset
from .errors import BandwidthError, EstimationError
from .numeric import (
    EPANECHNIKOV,
    default_bandwidth_grid,
    fit_wls,
    local_linear_fit,
    select_bandwidth,
)
from .nuisance import NuisanceModelSet, NuisanceSpec, default_dose_grid, fit_nuisances
from .pseudo import build_pseudo_outcomes, compute_theta0, normalize_weights

__all__ = [
    "METHODS",
    "EffectCurveEstimate",
    "EstimatorConfig",
    "estimate_curve",
    "local_linear_curve",
    "parametric_theta",
    "robust_select_bandwidth",
    "write_curve",
]

METHODS = ("MR", "MR_PARAMETRIC", "OR", "IPW", "NAIVE", "TWFE")

_NEEDS = {
    "MR": ("pi_a", "pi_d", "mu1", "mu0"),
    "MR_PARAMETRIC": ("pi_a", "pi_d", "mu1", "mu0"),
    "OR": ("mu1", "mu0"),
    "IPW": ("pi_a", "pi_d"),
    "NAIVE": (),
    "TWFE": (),
}


@dataclass(frozen=True)
class EffectCurveEstimate:
    """Point estimates of the effect curve on a strictly increasing grid.

    ``psi = theta_curve - theta0`` elementwise for the methods with that
    decomposition (TWFE reports theta0 = 0). Confidence bands are attached
    by the inference module.
    """

    method: str
    grid: np.ndarray
    psi: np.ndarray
    theta_curve: np.ndarray
    theta0: float
    bandwidth: float | None = None
    ci_lower: np.ndarray | None = None
    ci_upper: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
            raise EstimationError("grid must be one-dimensional and strictly increasing")
        for name in ("grid", "psi", "theta_curve", "ci_lower", "ci_upper"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.asarray(arr, dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def with_bands(self, lower: np.ndarray, upper: np.ndarray) -> "EffectCurveEstimate":
        return replace(self, ci_lower=np.asarray(lower, dtype=float), ci_upper=np.asarray(upper, dtype=float))


@dataclass(frozen=True)
class EstimatorConfig:
    """Everything needed to reproduce one curve fit on a dataset.

    The weighted bootstrap re-runs ``build`` with resampled unit weights;
    holding ``grid`` and ``bandwidth`` fixed here keeps replicates
    comparable pointwise.
    """

    method: str
    specs: dict[str, NuisanceSpec] | None = None
    grid: np.ndarray | None = None
    bandwidth: float | None = None
    bandwidth_grid: np.ndarray | None = None
    parametric_basis: tuple[int, ...] = (1, 3)
    on_out_of_range: str = "error"

    def build(self, data: TwoPeriodDataset, sample_weight: np.ndarray | None = None) -> EffectCurveEstimate:
        return estimate_curve(
            data,
            self.method,
            specs=self.specs,
            grid=self.grid,
            bandwidth=self.bandwidth,
            bandwidth_grid=self.bandwidth_grid,
            parametric_basis=self.parametric_basis,
            on_out_of_range=self.on_out_of_range,
            sample_weight=sample_weight,
        )


def local_linear_curve(dose, ys, grid, h, sample_weight=None):
    """Local linear intercepts of ``ys`` on ``dose`` at every grid point."""
    grid = np.asarray(grid, dtype=float)
    out = np.empty(grid.shape[0])
    for k, delta in enumerate(grid):
        out[k], _ = local_linear_fit(dose, ys, h, float(delta), EPANECHNIKOV, sample_weight)
    return out


def parametric_theta(dose, ys, grid, basis=(1, 3), sample_weight=None):
    """Least-squares polynomial dose regression evaluated on the grid."""
    dose = np.asarray(dose, dtype=float)
    design = np.column_stack([dose**p for p in (0, *basis)])
    w = np.ones(dose.shape[0]) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    fit = fit_wls(design, np.asarray(ys, dtype=float), w)
    grid = np.asarray(grid, dtype=float)
    return np.column_stack([grid**p for p in (0, *basis)]) @ fit.coefficients


def _min_feasible_bandwidth(xs) -> float:
    """Smallest h for which every point has two strict in-window partners
    (the second-nearest-neighbour distance, maximized over points)."""
    x = np.sort(np.asarray(xs, dtype=float))
    n = x.shape[0]
    inf = np.inf
    d_m1 = np.concatenate([[inf], x[1:] - x[:-1]])
    d_p1 = np.concatenate([x[1:] - x[:-1], [inf]])
    d_m2 = np.concatenate([[inf, inf], x[2:] - x[:-2]])
    d_p2 = np.concatenate([x[2:] - x[:-2], [inf, inf]])
    second = np.where(d_m1 <= d_p1, np.minimum(d_p1, d_m2), np.minimum(d_m1, d_p2))
    req = float(np.max(second[np.isfinite(second)])) if n > 2 else float(x[-1] - x[0])
    return req * (1.0 + 1e-9)


def robust_select_bandwidth(xs, ys, grid=None, kernel=EPANECHNIKOV, sample_weight=None) -> float:
    """Leave-one-out bandwidth selection with a widening fallback.

    When every candidate in the (default) grid is infeasible — an isolated
    extreme point with no neighbour inside the widest window — the grid is
    extended upward to the smallest everywhere-feasible bandwidth, so the
    estimator degrades to a smoother fit instead of failing outright.
    """
    x = np.asarray(xs, dtype=float)
    if grid is None:
        grid = default_bandwidth_grid(x)
    grid = np.asarray(grid, dtype=float)
    try:
        return select_bandwidth(x, ys, grid, kernel, sample_weight)
    except BandwidthError:
        top = float(np.max(grid))
        need = _min_feasible_bandwidth(x)
        if need <= top:
            raise
        extension = np.geomspace(top, need, 6)[1:]
        return select_bandwidth(x, ys, np.concatenate([grid, extension]), kernel, sample_weight)


def _smoothed_theta(data, ys, grid, bandwidth, bandwidth_grid, wt, diagnostics):
    if bandwidth is None:
        bandwidth = robust_select_bandwidth(data.dose, ys, bandwidth_grid, EPANECHNIKOV, wt)
        diagnostics["bandwidth_selected"] = True
    theta = local_linear_curve(data.dose, ys, grid, bandwidth, wt)
    return theta, float(bandwidth)


def estimate_curve(
    data: TwoPeriodDataset,
    method: str,
    specs: dict[str, NuisanceSpec] | None = None,
    grid: np.ndarray | None = None,
    bandwidth: float | None = None,
    sample_weight: np.ndarray | None = None,
    bandwidth_grid: np.ndarray | None = None,
    parametric_basis: tuple[int, ...] = (1, 3),
    on_out_of_range: str = "error",
    models: NuisanceModelSet | None = None,
) -> EffectCurveEstimate:
    """Estimate the effect curve by the requested method.

    Parameters
    ----------
    data : TwoPeriodDataset
    method : one of METHODS.
    specs : nuisance specifications, required for MR/MR_PARAMETRIC/OR/IPW.
    grid : evaluation grid; defaults to 50 points between the 10th and 90th
        treated-dose percentiles. Estimates are never produced outside the
        interior of the observed dose support.
    bandwidth : kernel bandwidth shared across the grid; selected by
        leave-one-out cross-validation on the method's own regression target
        when absent.
    sample_weight : optional per-unit weights threaded through every fit.
    models : pre-fitted nuisance set (must cover the method's needs and be
        marginalized on a grid compatible with ``grid``); fit internally
        when absent.
    """
    if method not in METHODS:
        raise EstimationError(f"unknown method {method!r}; expected one of {METHODS}")
    needed = _NEEDS[method]
    if needed and models is None:
        if specs is None:
            raise EstimationError(f"method {method} requires nuisance specs {needed}")
        missing = [k for k in needed if k not in specs]
        if missing:
            raise EstimationError(f"method {method} is missing nuisance specs: {', '.join(missing)}")
    if grid is None:
        grid = default_dose_grid(data.dose)
    grid = np.asarray(grid, dtype=float)

    w_all = None if sample_weight is None else np.asarray(sample_weight, dtype=float)
    wt, wc = (None, None) if w_all is None else data.split(w_all)
    trend_t, trend_c = data.split(data.trend)
    diagnostics: dict = {"clamped": 0, "bandwidth_selected": False}

    if method in ("MR", "MR_PARAMETRIC"):
        if models is None:
            models = fit_nuisances(data, specs, _NEEDS[method], dose_grid=grid, sample_weight=w_all)
        pseudo = build_pseudo_outcomes(data, models, w_all, on_out_of_range)
        diagnostics["clamped"] = pseudo.clamped
        diagnostics["pi_a_converged"] = bool(models.pi_a.fit.converged)
        if method == "MR":
            theta, bandwidth = _smoothed_theta(
                data, pseudo.xi, grid, bandwidth, bandwidth_grid, wt, diagnostics
            )
        else:
            theta = parametric_theta(data.dose, pseudo.xi, grid, parametric_basis, wt)
            diagnostics["parametric_basis"] = tuple(parametric_basis)
        theta0 = pseudo.theta0
        psi = theta - theta0

    elif method == "OR":
        if models is None:
            models = fit_nuisances(data, specs, ("mu1", "mu0"), dose_grid=grid, sample_weight=w_all)
        theta = models.mu1.dose_profile(grid, data.x_treated, wt)
        mu0_t = models.mu0(data.x_treated)
        wt_ones = np.ones(data.n_treated) if wt is None else wt
        theta0 = float(np.sum(wt_ones * mu0_t) / np.sum(wt_ones))
        psi = theta - theta0

    elif method == "IPW":
        if models is None:
            models = fit_nuisances(data, specs, ("pi_a", "pi_d"), dose_grid=grid, sample_weight=w_all)
        f_at_d = models.f_marginal(data.dose)
        raw_w1 = f_at_d / models.pi_d(data.dose, data.x_treated)
        w1 = normalize_weights(raw_w1, wt)
        target = w1 * trend_t
        theta, bandwidth = _smoothed_theta(data, target, grid, bandwidth, bandwidth_grid, wt, diagnostics)
        theta00, _, _ = compute_theta0(data, models, w_all, mu0_override=np.zeros(data.n))
        theta0 = theta00
        psi = theta - theta0
        diagnostics["pi_a_converged"] = bool(models.pi_a.fit.converged)

    elif method == "NAIVE":
        theta, bandwidth = _smoothed_theta(data, trend_t, grid, bandwidth, bandwidth_grid, wt, diagnostics)
        wc_ones = np.ones(data.n_control) if wc is None else wc
        theta0 = float(np.sum(wc_ones * trend_c) / np.sum(wc_ones))
        psi = theta - theta0

    else:  # TWFE
        psi, coef = _twfe_curve(data, grid, w_all)
        theta = psi
        theta0 = 0.0
        diagnostics["twfe_coefficients"] = coef

    return EffectCurveEstimate(
        method=method,
        grid=grid,
        psi=psi,
        theta_curve=theta,
        theta0=float(theta0),
        bandwidth=bandwidth,
        diagnostics=diagnostics,
    )


def _twfe_curve(data: TwoPeriodDataset, grid: np.ndarray, sample_weight):
    """Two-way fixed effects on the two periods stacked; the curve is the
    post-treatment interaction intercept plus its dose slope."""
    n = data.n
    a = data.a.astype(float)
    d_full = np.zeros(n)
    d_full[data.a] = data.dose
    ad = a * d_full

    def rows(t, y):
        return np.column_stack(
            [np.ones(n), data.x, np.full(n, float(t)), a, ad, float(t) * a, float(t) * ad]
        ), y

    x0, y0 = rows(0, data.y0)
    x1, y1 = rows(1, data.y1)
    design = np.vstack([x0, x1])
    response = np.concatenate([y0, y1])
    w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    fit = fit_wls(design, response, np.concatenate([w, w]))
    p = data.x.shape[1]
    tau0 = fit.coefficients[p + 4]
    tau_d = fit.coefficients[p + 5]
    return tau0 + tau_d * grid, fit.coefficients


def write_curve(estimate: EffectCurveEstimate, path, delimiter: str = ",") -> None:
    """Write one curve as delimited text with the documented columns."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow(["delta", "psi", "theta", "ci_lower", "ci_upper", "method", "bandwidth"])
        bw = "" if estimate.bandwidth is None else repr(float(estimate.bandwidth))
        for k in range(estimate.grid.shape[0]):
            lo = "" if estimate.ci_lower is None else repr(float(estimate.ci_lower[k]))
            hi = "" if estimate.ci_upper is None else repr(float(estimate.ci_upper[k]))
            writer.writerow(
                [
                    repr(float(estimate.grid[k])),
                    repr(float(estimate.psi[k])),
                    repr(float(estimate.theta_curve[k])),
                    lo,
                    hi,
                    estimate.method,
                    bw,
                ]
            )
