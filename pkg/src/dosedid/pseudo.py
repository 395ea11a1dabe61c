"""Influence-function ingredients.

Dose-side pseudo-outcomes for treated units,

    xi_i = m(D_i) + w1_i * [(Y_i1 - Y_i0) - mu1(D_i, X_i)],

with the generalized propensity weight w1_i = f(D_i) / pi_d(D_i | X_i)
normalized to mean one over the treated group before use; and the
control-side component

    theta0 = theta00 + theta01,
    theta00 = (1/n_0) sum_{controls} w0_i * [(Y_i1 - Y_i0) - mu0(X_i)],
    theta01 = (1/n_A) sum_{treated} mu0(X_i),

where w0_i = pi_a(X_i) / (1 - pi_a(X_i)) is normalized to mean one over the
controls. Dividing the control sum by the control count n_0 together with
the mean-one weights is the self-normalized (Hajek ratio) estimator
sum w0 * resid / sum w0, which is what keeps theta00 consistent for the
treated-population residual mean whichever of (pi_a, mu0) is correct. All
sums generalize to weighted sums when per-unit weights are supplied (the
bootstrap path).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import TwoPeriodDataset
from .errors import DataValidationError, ExtrapolationError
from .nuisance import NuisanceModelSet

__all__ = [
    "PseudoOutcomeSet",
    "normalize_weights",
    "compute_xi",
    "compute_theta0",
    "build_pseudo_outcomes",
]


@dataclass(frozen=True)
class PseudoOutcomeSet:
    """Per-unit pseudo-outcomes and normalized weights.

    ``xi`` and ``w1`` align with treated units in unit order; ``w0`` aligns
    with control units. ``clamped`` counts doses evaluated outside the
    tabulated marginal range (possible in bootstrap resamples).
    """

    xi: np.ndarray
    w1: np.ndarray
    w0: np.ndarray
    theta00: float
    theta01: float
    p_a1: float
    clamped: int = 0

    @property
    def theta0(self) -> float:
        return self.theta00 + self.theta01


def normalize_weights(weights: np.ndarray, sample_weight: np.ndarray | None = None) -> np.ndarray:
    """Rescale positive weights to (weighted) mean one, preserving ratios."""
    w = np.asarray(weights, dtype=float)
    if w.size == 0:
        raise DataValidationError("cannot normalize an empty weight vector")
    if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
        raise DataValidationError("weights must be finite and strictly positive")
    if sample_weight is None:
        mean = float(np.mean(w))
    else:
        sw = np.asarray(sample_weight, dtype=float)
        mean = float(np.sum(sw * w) / np.sum(sw))
    return w / mean


def compute_xi(
    data: TwoPeriodDataset,
    models: NuisanceModelSet,
    sample_weight: np.ndarray | None = None,
    on_out_of_range: str = "error",
) -> tuple[np.ndarray, np.ndarray]:
    """Pseudo-outcomes for the treated group.

    Returns ``(xi, raw_w1)``; the Hajek-normalized weights are applied to
    the residual term internally. ``on_out_of_range`` controls what happens
    when a treated dose falls outside the tabulated marginals: ``"error"``
    raises (naming the unit), ``"clamp"`` evaluates at the nearest endpoint.
    """
    if models.m_marginal is None or models.f_marginal is None or models.mu1 is None or models.pi_d is None:
        raise DataValidationError("compute_xi needs fitted mu1/pi_d models and their marginals")
    d = data.dose
    if on_out_of_range == "error":
        outside = models.m_marginal.out_of_range(d)
        if np.any(outside):
            treated_ids = [uid for uid, flag in zip(data.ids, data.a) if flag]
            bad = int(np.nonzero(outside)[0][0])
            raise ExtrapolationError(
                f"dose {d[bad]} of unit {treated_ids[bad]!r} lies outside the tabulated marginal range"
            )
    elif on_out_of_range != "clamp":
        raise ValueError("on_out_of_range must be 'error' or 'clamp'")

    x_t = data.x_treated
    trend_t, _ = data.split(data.trend)
    wt = None if sample_weight is None else data.split(np.asarray(sample_weight, dtype=float))[0]

    m_at_d = models.m_marginal(d)
    f_at_d = models.f_marginal(d)
    pi_d_at = models.pi_d(d, x_t)  # floored inside the model
    raw_w1 = f_at_d / pi_d_at
    w1 = normalize_weights(raw_w1, wt)
    xi = m_at_d + w1 * (trend_t - models.mu1(d, x_t))
    return xi, raw_w1


def compute_theta0(
    data: TwoPeriodDataset,
    models: NuisanceModelSet,
    sample_weight: np.ndarray | None = None,
    mu0_override: np.ndarray | None = None,
) -> tuple[float, float, np.ndarray]:
    """Control-side components (theta00, theta01) and the raw ATT weights.

    ``mu0_override`` substitutes fixed per-unit mu0 predictions (length n);
    passing zeros yields the pure weighting estimator used by IPW.
    """
    if models.pi_a is None:
        raise DataValidationError("compute_theta0 needs a fitted pi_a model")
    if mu0_override is None:
        if models.mu0 is None:
            raise DataValidationError("compute_theta0 needs a fitted mu0 model")
        mu0_all = models.mu0(data.x)
    else:
        mu0_all = np.asarray(mu0_override, dtype=float)

    w = np.ones(data.n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    wt, wc = data.split(w)
    pa = models.pi_a(data.x)
    _, pa_c = data.split(pa)
    raw_w0 = pa_c / (1.0 - pa_c)
    w0 = normalize_weights(raw_w0, wc)

    trend_t, trend_c = data.split(data.trend)
    mu0_t, mu0_c = data.split(mu0_all)
    theta00 = float(np.sum(wc * w0 * (trend_c - mu0_c)) / np.sum(wc))
    theta01 = float(np.sum(wt * mu0_t) / np.sum(wt))
    return theta00, theta01, raw_w0


def build_pseudo_outcomes(
    data: TwoPeriodDataset,
    models: NuisanceModelSet,
    sample_weight: np.ndarray | None = None,
    on_out_of_range: str = "error",
) -> PseudoOutcomeSet:
    """Assemble the full pseudo-outcome set for the multiply robust path."""
    clamp_before = models.m_marginal.clamp_count if models.m_marginal is not None else 0
    xi, raw_w1 = compute_xi(data, models, sample_weight, on_out_of_range)
    theta00, theta01, raw_w0 = compute_theta0(data, models, sample_weight)
    w = None if sample_weight is None else np.asarray(sample_weight, dtype=float)
    wt, wc = (None, None) if w is None else data.split(w)
    n_a_w = data.n_treated if w is None else float(np.sum(wt))
    n_w = data.n if w is None else float(np.sum(w))
    clamped = (models.m_marginal.clamp_count - clamp_before) if models.m_marginal is not None else 0
    return PseudoOutcomeSet(
        xi=xi,
        w1=normalize_weights(raw_w1, wt),
        w0=normalize_weights(raw_w0, wc),
        theta00=theta00,
        theta01=theta01,
        p_a1=float(n_a_w / n_w),
        clamped=clamped,
    )
