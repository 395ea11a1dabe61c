"""Pointwise uncertainty for the multiply robust effect curve.

Two routes:

* **Sandwich variance** from stacked estimating equations. The base system
  has four equations per unit: the two local-linear kernel normal equations
  for (theta(delta), beta) - each carrying a quadrature correction term
  integrating the kernel against the covariate-level deviations
  mu1(d, X_i) - m(d) - and the two mean-type equations for theta00/theta01.
  Augmented mode appends the nuisance-model score equations and
  differentiates through the whole pipeline numerically. Stacked mode
  concatenates per-period systems so the variance of an average over
  periods picks up cross-period covariance.

* **Weighted bootstrap**: per replicate one exponential(1) weight per unit,
  rescaled so each intervention group's weights sum to its observed size,
  threaded through the entire estimation pipeline; percentile intervals
  from the replicate curves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curves import EffectCurveEstimate, EstimatorConfig
from .data import TwoPeriodDataset
from .errors import DoseDidError, EstimationError
from .numeric import EPANECHNIKOV, expit, local_linear_fit
from .nuisance import NuisanceModelSet, marginalize
from .pseudo import build_pseudo_outcomes

__all__ = [
    "Z_95",
    "EstimatingSystem",
    "BootstrapResult",
    "build_estimating_system",
    "sandwich_variance",
    "sandwich_bands",
    "stacked_sandwich_variance",
    "bootstrap_weights",
    "weighted_bootstrap",
]

Z_95 = 1.959963984540054  # two-sided 95% normal quantile
_FD_STEP = 1e-5
_PSI_CONTRAST = np.array([1.0, 0.0, -1.0, -1.0])  # psi = theta - theta00 - theta01


@dataclass(frozen=True)
class EstimatingSystem:
    """One solved estimating-equation system at a fixed delta.

    ``gamma`` holds per-unit equation values (n x P); ``bread`` the summed
    Jacobian estimate; ``meat`` the outer-product sum. ``contrast`` maps the
    parameter vector to the scalar of interest.
    """

    eta: np.ndarray
    gamma: np.ndarray
    bread: np.ndarray
    meat: np.ndarray
    contrast: np.ndarray
    bread_invertible: bool

    def covariance(self) -> np.ndarray:
        binv = np.linalg.inv(self.bread)
        return binv @ self.meat @ binv.T

    def variance(self) -> tuple[float, bool]:
        v = float(self.contrast @ self.covariance() @ self.contrast)
        if v < 0.0:
            return 0.0, True
        return v, False


class _CurveContext:
    """Per-curve quantities reused across grid deltas by the sandwich."""

    def __init__(self, data: TwoPeriodDataset, models: NuisanceModelSet, curve: EffectCurveEstimate):
        if curve.method != "MR":
            raise EstimationError("sandwich variance is defined for the MR curve")
        if curve.bandwidth is None:
            raise EstimationError("curve carries no bandwidth")
        self.data = data
        self.models = models
        self.h = float(curve.bandwidth)
        w = models.sample_weight
        self.w_all = np.ones(data.n) if w is None else np.asarray(w, dtype=float)
        self.wt, self.wc = data.split(self.w_all)
        self.p_hat = float(np.sum(self.wt) / np.sum(self.w_all))

        pseudo = build_pseudo_outcomes(data, models, w, on_out_of_range="clamp")
        self.xi = pseudo.xi
        self.w0n = pseudo.w0
        self.theta00 = pseudo.theta00
        self.theta01 = pseudo.theta01
        self.mu0_all = models.mu0(data.x)

        nodes = models.dose_nodes
        self.nodes = nodes
        tw = np.empty(nodes.shape[0])
        tw[1:-1] = 0.5 * (nodes[2:] - nodes[:-2])
        tw[0] = 0.5 * (nodes[1] - nodes[0])
        tw[-1] = 0.5 * (nodes[-1] - nodes[-2])
        self.trapw = tw
        self.f_nodes = models.f_marginal(nodes, count_clamps=False)
        m_nodes = models.m_marginal(nodes, count_clamps=False)
        # (n_treated, n_nodes) covariate-level deviations mu1(d, X_i) - m(d)
        self.dev = models.mu1.predict_matrix(nodes, data.x_treated) - m_nodes[None, :]

    def gamma_eta(self, delta: float, eta: np.ndarray) -> np.ndarray:
        """Base 4-column per-unit estimating equations at (delta, eta)."""
        data = self.data
        theta, beta, theta00, theta01 = eta
        u_nodes = (self.nodes - delta) / self.h
        k_nodes = EPANECHNIKOV(u_nodes)
        q0 = self.trapw * k_nodes * self.f_nodes
        c0 = self.dev @ q0
        c1 = self.dev @ (q0 * u_nodes)

        u = (data.dose - delta) / self.h
        k = EPANECHNIKOV(u)
        resid = self.xi - theta - u * beta

        gamma = np.zeros((data.n, 4))
        treated = data.a
        gamma[treated, 0] = self.wt * (k * resid + c0) / self.p_hat
        gamma[treated, 1] = self.wt * (k * u * resid + c1) / self.p_hat
        trend_c = data.trend[~treated]
        mu0_c = self.mu0_all[~treated]
        # theta00/theta01 are self-normalized group means, so their
        # equations live on their own group only.
        gamma[~treated, 2] = self.wc * (self.w0n * (trend_c - mu0_c) - theta00)
        gamma[treated, 3] = self.wt * (self.mu0_all[treated] - theta01)

        return gamma

    def solve_eta(self, delta: float) -> np.ndarray:
        theta, beta = local_linear_fit(
            self.data.dose, self.xi, self.h, delta, EPANECHNIKOV, self.wt
        )
        return np.array([theta, beta, self.theta00, self.theta01])

    def bread_eta(self, delta: float) -> np.ndarray:
        """Analytic Jacobian of the summed base equations in eta."""
        u = (self.data.dose - delta) / self.h
        k = EPANECHNIKOV(u)
        s0 = float(np.sum(self.wt * k)) / self.p_hat
        s1 = float(np.sum(self.wt * k * u)) / self.p_hat
        s2 = float(np.sum(self.wt * k * u * u)) / self.p_hat
        bread = np.zeros((4, 4))
        bread[0, 0] = -s0
        bread[0, 1] = -s1
        bread[1, 0] = -s1
        bread[1, 1] = -s2
        bread[2, 2] = -float(np.sum(self.wc))
        bread[3, 3] = -float(np.sum(self.wt))
        return bread


def _augmented_blocks(ctx: _CurveContext):
    """Parameter packing and score equations for the four parametric fits."""
    models = ctx.models
    for name, spec in models.specs.items():
        if spec.learner == "flexible-additive":
            raise EstimationError(
                f"augmented sandwich mode requires parametric learners; {name} is flexible-additive"
            )
    data = ctx.data
    x_t = data.x_treated
    d = data.dose
    trend_t, trend_c = data.split(data.trend)

    r_mean = models.pi_d.mean_design.build(x_t)
    r_resid = models.pi_d.resid_design.build(x_t)
    x_mu1 = models.mu1.design(d, x_t)
    x_pa = models.pi_a.design.build(data.x)
    x_mu0 = models.mu0.design.build(data.x_control)

    params = [
        models.pi_d.mean_coef,
        models.pi_d.resid_coef,
        models.mu1.coefficients,
        models.pi_a.coefficients,
        models.mu0.coefficients,
    ]
    sizes = [p.shape[0] for p in params]

    def scores(packed: np.ndarray) -> np.ndarray:
        alpha_d, gamma_r, lam1, alpha_a, lam0 = _unpack(packed, sizes)
        out = np.zeros((data.n, sum(sizes)))
        treated = data.a
        eps = d - r_mean @ alpha_d
        cols = 0
        blk = ctx.wt[:, None] * r_mean * eps[:, None]
        out[treated, cols : cols + sizes[0]] = blk
        cols += sizes[0]
        blk = ctx.wt[:, None] * r_resid * (eps**2 - r_resid @ gamma_r)[:, None]
        out[treated, cols : cols + sizes[1]] = blk
        cols += sizes[1]
        blk = ctx.wt[:, None] * x_mu1 * (trend_t - x_mu1 @ lam1)[:, None]
        out[treated, cols : cols + sizes[2]] = blk
        cols += sizes[2]
        out[:, cols : cols + sizes[3]] = (
            ctx.w_all[:, None] * x_pa * (data.a.astype(float) - expit(x_pa @ alpha_a))[:, None]
        )
        cols += sizes[3]
        blk = ctx.wc[:, None] * x_mu0 * (trend_c - x_mu0 @ lam0)[:, None]
        out[~treated, cols : cols + sizes[4]] = blk
        return out

    def rebuild(packed: np.ndarray) -> NuisanceModelSet:
        alpha_d, gamma_r, lam1, alpha_a, lam0 = _unpack(packed, sizes)
        pi_d = models.pi_d.with_parameters(alpha_d, gamma_r, d, x_t, ctx.wt if models.sample_weight is not None else None)
        mu1 = models.mu1.with_coefficients(lam1)
        pi_a = models.pi_a.with_coefficients(alpha_a)
        mu0 = models.mu0.with_coefficients(lam0)
        m_curve, f_curve = marginalize(mu1, pi_d, data, models.dose_nodes, models.sample_weight)
        return NuisanceModelSet(
            pi_a=pi_a,
            pi_d=pi_d,
            mu1=mu1,
            mu0=mu0,
            m_marginal=m_curve,
            f_marginal=f_curve,
            dose_nodes=m_curve.x,
            specs=models.specs,
            data=data,
            sample_weight=models.sample_weight,
        )

    return np.concatenate(params), sizes, scores, rebuild


def _unpack(packed: np.ndarray, sizes) -> list[np.ndarray]:
    out = []
    start = 0
    for s in sizes:
        out.append(packed[start : start + s])
        start += s
    return out


def build_estimating_system(
    data: TwoPeriodDataset,
    models: NuisanceModelSet,
    curve: EffectCurveEstimate,
    delta: float,
    mode: str = "base",
) -> EstimatingSystem:
    """Assemble Gamma, bread, and meat for one delta.

    ``mode="base"`` treats the nuisance fits as fixed; ``mode="augmented"``
    appends their score equations (parametric learners only), with the
    cross-derivative bread entries taken by central finite differences of
    the full pipeline. ``mode="stacked"`` on a single dataset is the M=1
    stack and matches base exactly.
    """
    if mode not in ("base", "augmented", "stacked"):
        raise EstimationError(f"unknown sandwich mode {mode!r}")
    ctx = _CurveContext(data, models, curve)
    eta = ctx.solve_eta(float(delta))
    gamma = ctx.gamma_eta(float(delta), eta)
    bread = ctx.bread_eta(float(delta))

    if mode in ("base", "stacked"):
        meat = gamma.T @ gamma
        invertible = _invertible(bread)
        return EstimatingSystem(
            eta=eta,
            gamma=gamma,
            bread=bread,
            meat=meat,
            contrast=_PSI_CONTRAST,
            bread_invertible=invertible,
        )

    packed, sizes, scores, rebuild = _augmented_blocks(ctx)
    p_extra = int(sum(sizes))
    gamma_full = np.hstack([gamma, scores(packed)])
    p_total = 4 + p_extra
    bread_full = np.zeros((p_total, p_total))
    bread_full[:4, :4] = bread

    base_ctx_cache = {}

    def summed_gamma_at(packed_pt: np.ndarray) -> np.ndarray:
        key = packed_pt.tobytes()
        if key not in base_ctx_cache:
            models_pt = rebuild(packed_pt)
            ctx_pt = _CurveContext(data, models_pt, curve)
            g = ctx_pt.gamma_eta(float(delta), eta).sum(axis=0)
            s = scores_at(packed_pt).sum(axis=0)
            base_ctx_cache[key] = np.concatenate([g, s])
        return base_ctx_cache[key]

    def scores_at(packed_pt: np.ndarray) -> np.ndarray:
        return scores(packed_pt)

    for j in range(p_extra):
        step = _FD_STEP * max(1.0, abs(packed[j]))
        hi = packed.copy()
        hi[j] += step
        lo = packed.copy()
        lo[j] -= step
        bread_full[:, 4 + j] = (summed_gamma_at(hi) - summed_gamma_at(lo)) / (2.0 * step)

    meat = gamma_full.T @ gamma_full
    contrast = np.zeros(p_total)
    contrast[:4] = _PSI_CONTRAST
    return EstimatingSystem(
        eta=np.concatenate([eta, packed]),
        gamma=gamma_full,
        bread=bread_full,
        meat=meat,
        contrast=contrast,
        bread_invertible=_invertible(bread_full),
    )


def _invertible(mat: np.ndarray) -> bool:
    try:
        cond = np.linalg.cond(mat)
    except np.linalg.LinAlgError:
        return False
    return bool(np.isfinite(cond) and cond < 1e12)


def sandwich_variance(
    data: TwoPeriodDataset,
    models: NuisanceModelSet,
    curve: EffectCurveEstimate,
    delta: float,
    mode: str = "base",
) -> float:
    """Sandwich variance of psi-hat at one delta (floored at zero)."""
    system = build_estimating_system(data, models, curve, delta, mode)
    if not system.bread_invertible:
        raise EstimationError(f"singular bread matrix at delta={delta}")
    var, _ = system.variance()
    return var


def sandwich_bands(
    data: TwoPeriodDataset,
    models: NuisanceModelSet,
    curve: EffectCurveEstimate,
    mode: str = "base",
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """95% pointwise normal-approximation bands along the curve's grid."""
    variances = np.empty(curve.grid.shape[0])
    if mode == "base":
        ctx = _CurveContext(data, models, curve)
        for k, delta in enumerate(curve.grid):
            eta = ctx.solve_eta(float(delta))
            gamma = ctx.gamma_eta(float(delta), eta)
            bread = ctx.bread_eta(float(delta))
            system = EstimatingSystem(
                eta=eta,
                gamma=gamma,
                bread=bread,
                meat=gamma.T @ gamma,
                contrast=_PSI_CONTRAST,
                bread_invertible=_invertible(bread),
            )
            if not system.bread_invertible:
                raise EstimationError(f"singular bread matrix at delta={delta}")
            variances[k], _ = system.variance()
    else:
        for k, delta in enumerate(curve.grid):
            variances[k] = sandwich_variance(data, models, curve, float(delta), mode)
    half = Z_95 * np.sqrt(variances)
    return curve.psi - half, curve.psi + half, variances


def stacked_sandwich_variance(
    systems: list[tuple[TwoPeriodDataset, NuisanceModelSet, EffectCurveEstimate]],
    delta: float,
) -> float:
    """Variance of the across-period average curve at one delta.

    Stacks the M per-period base systems unit by unit, so the meat picks up
    within-unit covariance across periods; the contrast averages the M
    per-period psi contrasts.
    """
    if not systems:
        raise EstimationError("no per-period systems supplied")
    n = systems[0][0].n
    m_count = len(systems)
    gammas = []
    breads = []
    etas = []
    for data_m, models_m, curve_m in systems:
        if data_m.n != n:
            raise EstimationError("stacked periods must share the unit roster")
        ctx = _CurveContext(data_m, models_m, curve_m)
        eta = ctx.solve_eta(float(delta))
        gammas.append(ctx.gamma_eta(float(delta), eta))
        breads.append(ctx.bread_eta(float(delta)))
        etas.append(eta)
    gamma = np.hstack(gammas)
    bread = np.zeros((4 * m_count, 4 * m_count))
    for j, b in enumerate(breads):
        bread[4 * j : 4 * j + 4, 4 * j : 4 * j + 4] = b
    meat = gamma.T @ gamma
    contrast = np.tile(_PSI_CONTRAST / m_count, m_count)
    system = EstimatingSystem(
        eta=np.concatenate(etas),
        gamma=gamma,
        bread=bread,
        meat=meat,
        contrast=contrast,
        bread_invertible=_invertible(bread),
    )
    if not system.bread_invertible:
        raise EstimationError(f"singular stacked bread matrix at delta={delta}")
    var, _ = system.variance()
    return var


# --------------------------------------------------------------------------
# weighted bootstrap
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BootstrapResult:
    """Percentile confidence bands from unit-weighted replicates."""

    b_requested: int
    b_failed: int
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    flagged: bool
    seed: int
    curves: np.ndarray | None = None  # (B_success, K) psi rows, replicate order

    @property
    def b_success(self) -> int:
        return self.b_requested - self.b_failed


def bootstrap_weights(a: np.ndarray, seed: int, replicate: int) -> np.ndarray:
    """Exponential(1) unit weights, rescaled so each intervention group's
    weights sum to its observed size.

    The stream is counter-based (Philox keyed by (seed, replicate)), so any
    replicate's weights can be generated independently of the others.
    """
    a = np.asarray(a, dtype=bool)
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(replicate)], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    w = rng.standard_exponential(a.shape[0])
    n_t = int(a.sum())
    w[a] *= n_t / w[a].sum()
    w[~a] *= (a.shape[0] - n_t) / w[~a].sum()
    return w


def weighted_bootstrap(
    data: TwoPeriodDataset,
    estimator_config: EstimatorConfig,
    b_replicates: int,
    seed: int,
    keep_curves: bool = False,
    weight_fn=None,
) -> BootstrapResult:
    """Unit-level exponential weighted bootstrap of an effect curve.

    Each replicate re-runs the full pipeline described by
    ``estimator_config`` (nuisance fits, pseudo-outcomes, smoothing) with
    the drawn unit weights threaded through every weighted fit and mean.
    Replicates that raise are counted and skipped; percentile bands use the
    survivors. ``weight_fn`` substitutes the weight stream (testing hook).

    Raises EstimationError when ``b_replicates < 2``.
    """
    if b_replicates < 2:
        raise EstimationError("bootstrap needs at least 2 replicates")
    if estimator_config.grid is None:
        raise EstimationError("bootstrap requires a fixed evaluation grid in the estimator config")
    if weight_fn is None:
        weight_fn = lambda b: bootstrap_weights(data.a, seed, b)  # noqa: E731

    rows = []
    failed = 0
    for b in range(b_replicates):
        w = np.asarray(weight_fn(b), dtype=float)
        try:
            curve = estimator_config.build(data, sample_weight=w)
        except DoseDidError:
            failed += 1
            continue
        rows.append(curve.psi)
    if not rows:
        raise EstimationError("every bootstrap replicate failed")
    curves = np.vstack(rows)
    lo, hi = np.percentile(curves, [2.5, 97.5], axis=0)
    return BootstrapResult(
        b_requested=b_replicates,
        b_failed=failed,
        ci_lower=lo,
        ci_upper=hi,
        flagged=failed > 0.1 * b_replicates,
        seed=seed,
        curves=curves if keep_curves else None,
    )
