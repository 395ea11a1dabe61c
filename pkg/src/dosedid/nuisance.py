"""Nuisance function estimation.

Four models feed the effect-curve estimators:

* ``pi_a(x)``      treatment propensity P(A=1 | x),
* ``pi_d(d, x)``   conditional dose density among the treated,
* ``mu1(d, x)``    expected outcome trend among treated at dose d,
* ``mu0(x)``       expected outcome trend among controls,

plus their treated-population marginals ``m(d)`` (average of mu1 over
treated covariates) and ``f(d)`` (average of pi_d over treated covariates).
Each fit accepts configurable specifications: a covariate map (identity or
the Kang-Schafer nonlinear transform, used to induce misspecification in
simulation studies) and a learner (linear / logistic, or a natural cubic
spline additive expansion).

The dose density is fit in three stages on treated units only: a mean model
for D given X, a squared-residual model for the conditional variance, and a
Gaussian kernel density over the standardized residuals.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import TwoPeriodDataset
from .errors import FitError
from .numeric import (
    DensityEstimate,
    LinearFit,
    LogisticFit,
    fit_logistic,
    fit_wls,
    gaussian_kde,
    silverman_bandwidth,
)

__all__ = [
    "DENSITY_FLOOR",
    "RESIDUAL_VAR_FLOOR",
    "NuisanceSpec",
    "NuisanceModelSet",
    "TabulatedCurve",
    "kang_schafer_map",
    "fit_pi_a",
    "fit_pi_d",
    "fit_mu1",
    "fit_mu0",
    "marginalize",
    "fit_nuisances",
    "default_dose_grid",
    "default_specs",
]

# Conditional dose densities (and their marginal) are floored here before
# entering any weight denominator, bounding 1/pi_d numerically.
DENSITY_FLOOR = 1e-4
# Squared-residual predictions are floored before standardization.
RESIDUAL_VAR_FLOOR = 1e-6

_MIN_GROUP = 10
_KDE_TABLE_SIZE = 4097
_KDE_TABLE_PAD = 8.0  # bandwidths beyond the sample range

VALID_WHICH = ("pi_a", "pi_d", "mu1", "mu0")
VALID_MAPS = ("identity", "kang_schafer")


def kang_schafer_map(x: np.ndarray) -> np.ndarray:
    """Nonlinear 4-covariate transform used to induce model misspecification.

    Componentwise: ``w1 = exp(x1/2)``, ``w2 = x2 / (1 + exp(x1)) + 10``,
    ``w3 = (x1 * x3 / 25 + 0.6)**3``, ``w4 = (x2 + x4 + 20)**2``.
    """
    arr = np.asarray(x, dtype=float)
    if arr.shape[-1] != 4:
        raise ValueError("kang_schafer_map expects 4 covariates")
    x1, x2, x3, x4 = (arr[..., j] for j in range(4))
    return np.stack(
        [
            np.exp(x1 / 2.0),
            x2 / (1.0 + np.exp(x1)) + 10.0,
            (x1 * x3 / 25.0 + 0.6) ** 3,
            (x2 + x4 + 20.0) ** 2,
        ],
        axis=-1,
    )


def _apply_map(x: np.ndarray, covariate_map: str) -> np.ndarray:
    if covariate_map == "identity":
        return np.asarray(x, dtype=float)
    if covariate_map == "kang_schafer":
        return kang_schafer_map(x)
    raise ValueError(f"unknown covariate map {covariate_map!r}")


@dataclass(frozen=True)
class NuisanceSpec:
    """Specification for one nuisance fit.

    ``dose_powers`` and ``dose_interactions`` shape the mu1 design under the
    linear learner: dose enters through the listed powers plus products of
    the dose with the listed (mapped) covariate indices. ``kde_bandwidth``
    overrides Silverman's rule for the pi_d residual density.
    """

    which: str
    learner: str = "linear"
    covariate_map: str = "identity"
    dose_powers: tuple[int, ...] = (1,)
    dose_interactions: tuple[int, ...] = ()
    kde_bandwidth: float | None = None
    fit_mu0_on: str = "controls_only"

    def __post_init__(self):
        if self.which not in VALID_WHICH:
            raise ValueError(f"unknown nuisance target {self.which!r}")
        if self.covariate_map not in VALID_MAPS:
            raise ValueError(f"unknown covariate map {self.covariate_map!r}")
        allowed = ("logistic", "flexible-additive") if self.which == "pi_a" else ("linear", "flexible-additive")
        if self.learner not in allowed:
            raise ValueError(f"{self.which} learner must be one of {allowed}, got {self.learner!r}")
        if self.fit_mu0_on != "controls_only":
            raise ValueError("mu0 is fit on controls only; pooled fitting is not offered")
        object.__setattr__(self, "dose_powers", tuple(int(p) for p in self.dose_powers))
        object.__setattr__(self, "dose_interactions", tuple(int(j) for j in self.dose_interactions))


def default_specs(misspecified=(), mu1_dose_powers=(1,), mu1_dose_interactions=()) -> dict[str, NuisanceSpec]:
    """Linear/logistic specs for all four models.

    Names listed in ``misspecified`` get the Kang-Schafer covariate map; a
    misspecified mu1 additionally collapses to a dose-linear design (no
    higher powers or interactions), i.e. the wrong model is both fed
    transformed covariates and structurally naive about the dose.
    """
    wrong = set(misspecified)
    unknown = wrong.difference(VALID_WHICH)
    if unknown:
        raise ValueError(f"unknown nuisance names: {sorted(unknown)}")

    def cmap(name):
        return "kang_schafer" if name in wrong else "identity"

    return {
        "pi_a": NuisanceSpec(which="pi_a", learner="logistic", covariate_map=cmap("pi_a")),
        "pi_d": NuisanceSpec(which="pi_d", learner="linear", covariate_map=cmap("pi_d")),
        "mu1": NuisanceSpec(
            which="mu1",
            learner="linear",
            covariate_map=cmap("mu1"),
            dose_powers=(1,) if "mu1" in wrong else tuple(mu1_dose_powers),
            dose_interactions=() if "mu1" in wrong else tuple(mu1_dose_interactions),
        ),
        "mu0": NuisanceSpec(which="mu0", learner="linear", covariate_map=cmap("mu0")),
    }


# --------------------------------------------------------------------------
# design construction
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class _SplineBasis:
    """Natural cubic spline basis: linear column plus one column per
    interior knot; linear beyond the boundary knots."""

    knots: np.ndarray  # sorted, boundary knots included

    @classmethod
    def from_data(cls, values: np.ndarray, n_interior: int = 4) -> "_SplineBasis":
        qs = np.linspace(0.0, 100.0, n_interior + 2)
        knots = np.unique(np.percentile(np.asarray(values, dtype=float), qs))
        return cls(knots=knots)

    def transform(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        k = self.knots
        if k.size < 3:
            return v[:, None]

        last = k[-1]
        second_last = k[-2]

        def d(knot):
            num = np.maximum(v - knot, 0.0) ** 3 - np.maximum(v - last, 0.0) ** 3
            return num / (last - knot)

        d_ref = d(second_last)
        cols = [v] + [d(knot) - d_ref for knot in k[:-2]]
        return np.column_stack(cols)


@dataclass(frozen=True)
class CovariateDesign:
    """Maps raw covariates to a design block [1, g1(x), ..., gk(x)]."""

    covariate_map: str
    learner: str
    splines: tuple[_SplineBasis, ...] | None = None

    @classmethod
    def from_training(cls, x: np.ndarray, spec: NuisanceSpec) -> "CovariateDesign":
        mapped = _apply_map(x, spec.covariate_map)
        if spec.learner == "flexible-additive":
            splines = tuple(_SplineBasis.from_data(mapped[:, j]) for j in range(mapped.shape[1]))
        else:
            splines = None
        return cls(covariate_map=spec.covariate_map, learner=spec.learner, splines=splines)

    def mapped(self, x: np.ndarray) -> np.ndarray:
        return _apply_map(x, self.covariate_map)

    def build(self, x: np.ndarray) -> np.ndarray:
        mapped = self.mapped(x)
        n = mapped.shape[0]
        if self.splines is None:
            return np.column_stack([np.ones(n), mapped])
        blocks = [np.ones((n, 1))]
        blocks += [basis.transform(mapped[:, j]) for j, basis in enumerate(self.splines)]
        return np.hstack(blocks)


@dataclass(frozen=True)
class _DoseBasis:
    """Dose-only design columns: monomial powers or a natural spline."""

    kind: str  # "powers" | "spline"
    powers: tuple[int, ...] = (1,)
    spline: _SplineBasis | None = None

    def columns(self, d: np.ndarray) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        if self.kind == "powers":
            return np.column_stack([d**p for p in self.powers])
        return self.spline.transform(d)


# --------------------------------------------------------------------------
# fitted model containers
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PropensityModel:
    """Fitted P(A=1 | x); outputs clipped into [1e-6, 1 - 1e-6]."""

    fit: LogisticFit
    design: CovariateDesign

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.fit.predict_proba(self.design.build(x))

    @property
    def coefficients(self) -> np.ndarray:
        return self.fit.coefficients

    def with_coefficients(self, coef: np.ndarray) -> "PropensityModel":
        return replace(self, fit=replace(self.fit, coefficients=np.asarray(coef, dtype=float)))


@dataclass(frozen=True)
class CovariateTrendModel:
    """Fitted x -> expected trend (hosts mu0)."""

    fit: LinearFit
    design: CovariateDesign

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.fit.predict(self.design.build(x))

    @property
    def coefficients(self) -> np.ndarray:
        return self.fit.coefficients

    def with_coefficients(self, coef: np.ndarray) -> "CovariateTrendModel":
        return replace(self, fit=replace(self.fit, coefficients=np.asarray(coef, dtype=float)))


@dataclass(frozen=True)
class DoseTrendModel:
    """Fitted (d, x) -> expected trend among treated (hosts mu1).

    The design is [cov block | dose block | d * mapped covariate j ...]; all
    blocks are linear in the coefficients, which makes covariate-averaged
    dose profiles cheap.
    """

    coefficients: np.ndarray
    cov_design: CovariateDesign
    dose_basis: _DoseBasis
    interactions: tuple[int, ...]
    ridged: bool = False

    def design(self, d: np.ndarray, x: np.ndarray) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        blocks = [self.cov_design.build(x), self.dose_basis.columns(d)]
        if self.interactions:
            mapped = self.cov_design.mapped(x)
            blocks.append(d[:, None] * mapped[:, list(self.interactions)])
        return np.hstack(blocks)

    def __call__(self, d, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = np.broadcast_to(np.asarray(d, dtype=float), (x.shape[0],))
        return self.design(d, x) @ self.coefficients

    def _blocks(self, x: np.ndarray):
        cov = self.cov_design.build(x)
        k_cov = cov.shape[1]
        probe = self.dose_basis.columns(np.zeros(1))
        k_dose = probe.shape[1]
        c_cov = self.coefficients[:k_cov]
        c_dose = self.coefficients[k_cov : k_cov + k_dose]
        c_int = self.coefficients[k_cov + k_dose :]
        return cov, c_cov, c_dose, c_int

    def predict_matrix(self, dose_nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
        """(n_units, n_nodes) predictions, exploiting block linearity."""
        nodes = np.asarray(dose_nodes, dtype=float)
        cov, c_cov, c_dose, c_int = self._blocks(x)
        out = (cov @ c_cov)[:, None] + (self.dose_basis.columns(nodes) @ c_dose)[None, :]
        if self.interactions:
            mapped = self.cov_design.mapped(x)
            factor = mapped[:, list(self.interactions)] @ c_int
            out = out + np.outer(factor, nodes)
        return out

    def dose_profile(self, dose_nodes: np.ndarray, x: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
        """Weighted covariate-average prediction at each dose node."""
        nodes = np.asarray(dose_nodes, dtype=float)
        cov, c_cov, c_dose, c_int = self._blocks(x)
        w = np.ones(cov.shape[0]) if weights is None else np.asarray(weights, dtype=float)
        wsum = float(np.sum(w))
        base = float(np.sum(w * (cov @ c_cov)) / wsum)
        out = base + self.dose_basis.columns(nodes) @ c_dose
        if self.interactions:
            mapped = self.cov_design.mapped(x)
            factor = float(np.sum(w * (mapped[:, list(self.interactions)] @ c_int)) / wsum)
            out = out + factor * nodes
        return out

    def with_coefficients(self, coef: np.ndarray) -> "DoseTrendModel":
        return replace(self, coefficients=np.asarray(coef, dtype=float))


@dataclass(frozen=True)
class DoseDensityModel:
    """Fitted conditional dose density among treated, pi_d(d | x).

    Composition of a mean model, a floored squared-residual model, and a
    kernel density over standardized residuals: the returned value is
    ``kde((d - mean(x)) / s(x)) / s(x)``, floored at DENSITY_FLOOR. The kde
    is evaluated through a dense interpolation table for speed.
    """

    mean_coef: np.ndarray
    resid_coef: np.ndarray
    mean_design: CovariateDesign
    resid_design: CovariateDesign
    kde: DensityEstimate
    table_x: np.ndarray
    table_y: np.ndarray
    bandwidth_spec: float | None = None

    def mean(self, x: np.ndarray) -> np.ndarray:
        return self.mean_design.build(x) @ self.mean_coef

    def sdev(self, x: np.ndarray) -> np.ndarray:
        var = self.resid_design.build(x) @ self.resid_coef
        return np.sqrt(np.maximum(var, RESIDUAL_VAR_FLOOR))

    def __call__(self, d, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = np.broadcast_to(np.asarray(d, dtype=float), (x.shape[0],))
        mu = self.mean(x)
        s = self.sdev(x)
        dens = np.interp((d - mu) / s, self.table_x, self.table_y) / s
        return np.maximum(dens, DENSITY_FLOOR)

    def marginal_density(
        self, dose_nodes: np.ndarray, x: np.ndarray, weights: np.ndarray | None = None
    ) -> np.ndarray:
        """Weighted average of pi_d(node | x_i) over units, per node."""
        nodes = np.asarray(dose_nodes, dtype=float)
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = x.shape[0]
        w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
        w = w / np.sum(w)
        mu = self.mean(x)
        s = self.sdev(x)
        out = np.zeros(nodes.shape[0])
        step = max(1, int(4_000_000 / max(1, n)))
        for start in range(0, nodes.shape[0], step):
            block = nodes[start : start + step]
            z = (block[:, None] - mu[None, :]) / s[None, :]
            dens = np.interp(z, self.table_x, self.table_y) / s[None, :]
            out[start : start + step] = np.maximum(dens, DENSITY_FLOOR) @ w
        return out

    def with_parameters(self, mean_coef, resid_coef, d, x, sample_weight=None) -> "DoseDensityModel":
        """Rebuild the full three-stage model at new mean/variance
        coefficients, re-deriving residuals and their kernel density from
        the supplied training data."""
        return _assemble_dose_density(
            np.asarray(mean_coef, dtype=float),
            np.asarray(resid_coef, dtype=float),
            self.mean_design,
            self.resid_design,
            np.asarray(d, dtype=float),
            np.asarray(x, dtype=float),
            sample_weight,
            self.bandwidth_spec,
        )


@dataclass
class TabulatedCurve:
    """Piecewise-linear curve over sorted dose nodes.

    Evaluation outside the tabulated range clamps to the nearest endpoint
    and increments ``clamp_count`` (the counter is diagnostics only and not
    thread-safe).
    """

    x: np.ndarray
    y: np.ndarray
    floor: float | None = None
    clamp_count: int = 0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.x.setflags(write=False)
        self.y.setflags(write=False)

    def out_of_range(self, d) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        return (d < self.x[0]) | (d > self.x[-1])

    def __call__(self, d, count_clamps: bool = True):
        d = np.asarray(d, dtype=float)
        if count_clamps:
            self.clamp_count += int(np.count_nonzero(self.out_of_range(d)))
        out = np.interp(d, self.x, self.y)
        if self.floor is not None:
            out = np.maximum(out, self.floor)
        return float(out) if d.ndim == 0 else out


@dataclass(frozen=True)
class NuisanceModelSet:
    """The fitted nuisance functions plus their treated marginals.

    ``data``, ``sample_weight``, and ``specs`` are retained so inference
    code can rebuild the set at perturbed parameters.
    """

    pi_a: PropensityModel | None
    pi_d: DoseDensityModel | None
    mu1: DoseTrendModel | None
    mu0: CovariateTrendModel | None
    m_marginal: TabulatedCurve | None
    f_marginal: TabulatedCurve | None
    dose_nodes: np.ndarray | None
    specs: dict
    data: TwoPeriodDataset
    sample_weight: np.ndarray | None = None


# --------------------------------------------------------------------------
# fitting operations
# --------------------------------------------------------------------------


def _treated_weights(data: TwoPeriodDataset, sample_weight):
    if sample_weight is None:
        return None, None
    w = np.asarray(sample_weight, dtype=float)
    wt, wc = data.split(w)
    return wt, wc


def fit_pi_a(data: TwoPeriodDataset, spec: NuisanceSpec, sample_weight=None) -> PropensityModel:
    """Logistic regression of A on mapped covariates (spline-expanded for
    the flexible learner)."""
    if spec.which != "pi_a":
        raise ValueError("spec.which must be 'pi_a'")
    design = CovariateDesign.from_training(data.x, spec)
    w = None if sample_weight is None else np.asarray(sample_weight, dtype=float)
    fit = fit_logistic(design.build(data.x), data.a.astype(float), sample_weight=w)
    return PropensityModel(fit=fit, design=design)


def _assemble_dose_density(
    mean_coef, resid_coef, mean_design, resid_design, d, x, sample_weight, bandwidth_spec
) -> DoseDensityModel:
    mu = mean_design.build(x) @ mean_coef
    var = np.maximum(resid_design.build(x) @ resid_coef, RESIDUAL_VAR_FLOOR)
    std_resid = (d - mu) / np.sqrt(var)
    if not np.all(np.isfinite(std_resid)):
        raise FitError("non-finite standardized residuals in dose density fit")
    spread = float(np.std(std_resid))
    if spread <= 0.0:
        raise FitError("degenerate exposure: standardized residuals have zero spread")
    bw = bandwidth_spec if bandwidth_spec is not None else silverman_bandwidth(std_resid, sample_weight)
    kde = gaussian_kde(std_resid, bandwidth=bw, sample_weight=sample_weight)
    lo = std_resid.min() - _KDE_TABLE_PAD * kde.bandwidth
    hi = std_resid.max() + _KDE_TABLE_PAD * kde.bandwidth
    table_x = np.linspace(lo, hi, _KDE_TABLE_SIZE)
    table_y = kde(table_x)
    return DoseDensityModel(
        mean_coef=np.asarray(mean_coef, dtype=float),
        resid_coef=np.asarray(resid_coef, dtype=float),
        mean_design=mean_design,
        resid_design=resid_design,
        kde=kde,
        table_x=table_x,
        table_y=table_y,
        bandwidth_spec=bandwidth_spec,
    )


def fit_pi_d(data: TwoPeriodDataset, spec: NuisanceSpec, sample_weight=None) -> DoseDensityModel:
    """Three-stage conditional density fit on treated units only."""
    if spec.which != "pi_d":
        raise ValueError("spec.which must be 'pi_d'")
    if data.n_treated < _MIN_GROUP:
        raise FitError(f"need at least {_MIN_GROUP} treated units to fit the dose density")
    wt, _ = _treated_weights(data, sample_weight)
    x_t = data.x_treated
    d = data.dose
    if float(np.ptp(d)) == 0.0:
        raise FitError("degenerate exposure: constant dose among treated units")
    ones = np.ones(x_t.shape[0]) if wt is None else wt

    design = CovariateDesign.from_training(x_t, spec)
    mean_fit = fit_wls(design.build(x_t), d, ones)
    resid = d - mean_fit.predict(design.build(x_t))
    resid_fit = fit_wls(design.build(x_t), resid**2, ones)
    return _assemble_dose_density(
        mean_fit.coefficients,
        resid_fit.coefficients,
        design,
        design,
        d,
        x_t,
        wt,
        spec.kde_bandwidth,
    )


def fit_mu1(data: TwoPeriodDataset, spec: NuisanceSpec, sample_weight=None) -> DoseTrendModel:
    """Trend regression on treated units: covariates, dose powers, and
    configured dose-covariate interactions (smooth additive terms under the
    flexible learner)."""
    if spec.which != "mu1":
        raise ValueError("spec.which must be 'mu1'")
    if data.n_treated < _MIN_GROUP:
        raise FitError(f"need at least {_MIN_GROUP} treated units to fit mu1")
    wt, _ = _treated_weights(data, sample_weight)
    x_t = data.x_treated
    d = data.dose
    trend_t, _ = data.split(data.trend)

    cov_design = CovariateDesign.from_training(x_t, spec)
    if spec.learner == "flexible-additive":
        dose_basis = _DoseBasis(kind="spline", spline=_SplineBasis.from_data(d))
        interactions: tuple[int, ...] = ()
    else:
        dose_basis = _DoseBasis(kind="powers", powers=spec.dose_powers)
        interactions = spec.dose_interactions

    model = DoseTrendModel(
        coefficients=np.zeros(1),
        cov_design=cov_design,
        dose_basis=dose_basis,
        interactions=interactions,
    )
    design = model.design(d, x_t)
    fit = fit_wls(design, trend_t, np.ones(design.shape[0]) if wt is None else wt)
    return replace(model, coefficients=fit.coefficients, ridged=fit.ridged)


def fit_mu0(data: TwoPeriodDataset, spec: NuisanceSpec, sample_weight=None) -> CovariateTrendModel:
    """Trend regression on control units only."""
    if spec.which != "mu0":
        raise ValueError("spec.which must be 'mu0'")
    if data.n_control < _MIN_GROUP:
        raise FitError(f"need at least {_MIN_GROUP} control units to fit mu0")
    _, wc = _treated_weights(data, sample_weight)
    x_c = data.x_control
    _, trend_c = data.split(data.trend)
    design = CovariateDesign.from_training(x_c, spec)
    fit = fit_wls(design.build(x_c), trend_c, np.ones(x_c.shape[0]) if wc is None else wc)
    return CovariateTrendModel(fit=fit, design=design)


def default_dose_grid(doses: np.ndarray, size: int = 50, lo_pct: float = 10.0, hi_pct: float = 90.0) -> np.ndarray:
    """Evenly spaced grid between dose percentiles (defaults: 10th-90th)."""
    d = np.asarray(doses, dtype=float)
    lo, hi = np.percentile(d, [lo_pct, hi_pct])
    if not hi > lo:
        raise ValueError("degenerate dose distribution: percentile range is empty")
    return np.linspace(lo, hi, size)


def marginalize(
    mu1: DoseTrendModel | None,
    pi_d: DoseDensityModel | None,
    data: TwoPeriodDataset,
    dose_grid: np.ndarray,
    sample_weight=None,
) -> tuple[TabulatedCurve | None, TabulatedCurve | None]:
    """Average mu1 and pi_d over the treated covariate distribution.

    Both marginals are tabulated on the union of ``dose_grid`` and every
    observed treated dose, and evaluate by linear interpolation in between.
    """
    if data.n_treated == 0:
        raise FitError("cannot marginalize with no treated units")
    nodes = np.union1d(np.asarray(dose_grid, dtype=float), data.dose)
    wt, _ = _treated_weights(data, sample_weight)
    x_t = data.x_treated
    m_curve = None
    f_curve = None
    if mu1 is not None:
        m_curve = TabulatedCurve(x=nodes, y=mu1.dose_profile(nodes, x_t, wt))
    if pi_d is not None:
        f_curve = TabulatedCurve(
            x=nodes, y=pi_d.marginal_density(nodes, x_t, wt), floor=DENSITY_FLOOR
        )
    return m_curve, f_curve


def fit_nuisances(
    data: TwoPeriodDataset,
    specs: dict[str, NuisanceSpec],
    which=VALID_WHICH,
    dose_grid: np.ndarray | None = None,
    sample_weight=None,
) -> NuisanceModelSet:
    """Fit the requested nuisance models and assemble the model set with
    marginal curves for whichever of (mu1, pi_d) were fit."""
    which = tuple(which)
    for name in which:
        if name not in specs:
            raise ValueError(f"missing nuisance spec for {name!r}")
    pi_a = fit_pi_a(data, specs["pi_a"], sample_weight) if "pi_a" in which else None
    pi_d = fit_pi_d(data, specs["pi_d"], sample_weight) if "pi_d" in which else None
    mu1 = fit_mu1(data, specs["mu1"], sample_weight) if "mu1" in which else None
    mu0 = fit_mu0(data, specs["mu0"], sample_weight) if "mu0" in which else None
    m_curve = f_curve = None
    nodes = None
    if mu1 is not None or pi_d is not None:
        if dose_grid is None:
            dose_grid = default_dose_grid(data.dose)
        m_curve, f_curve = marginalize(mu1, pi_d, data, dose_grid, sample_weight)
        nodes = (m_curve or f_curve).x
    return NuisanceModelSet(
        pi_a=pi_a,
        pi_d=pi_d,
        mu1=mu1,
        mu0=mu0,
        m_marginal=m_curve,
        f_marginal=f_curve,
        dose_nodes=nodes,
        specs={k: specs[k] for k in which},
        data=data,
        sample_weight=None if sample_weight is None else np.asarray(sample_weight, dtype=float),
    )
