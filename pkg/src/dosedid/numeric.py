"""Self-contained numerical primitives.

Weighted least squares, IRLS logistic regression, Gaussian kernel density
estimation, the Epanechnikov local linear smoother, and leave-one-out
bandwidth selection. Everything here is pure: no global state, safe to call
from parallel workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BandwidthError, FitError

__all__ = [
    "KernelSpec",
    "EPANECHNIKOV",
    "LinearFit",
    "LogisticFit",
    "DensityEstimate",
    "expit",
    "fit_wls",
    "fit_logistic",
    "local_linear_fit",
    "default_bandwidth_grid",
    "select_bandwidth",
    "gaussian_kde",
    "silverman_bandwidth",
    "PROB_CLIP",
]

# Fitted propensities are clipped into [PROB_CLIP, 1 - PROB_CLIP] before any
# odds ratio is formed, enforcing strict positivity numerically.
PROB_CLIP = 1e-6

_RIDGE_REL = 1e-8
_WLS_MAX_CHOLESKY_RETRIES = 3


@dataclass(frozen=True)
class KernelSpec:
    """A symmetric probability-density kernel with compact support [-1, 1]."""

    kind: str = "epanechnikov"

    def __call__(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        out = 0.75 * (1.0 - u * u)
        return np.where(np.abs(u) <= 1.0, np.maximum(out, 0.0), 0.0)

    @property
    def support(self) -> tuple[float, float]:
        return (-1.0, 1.0)


EPANECHNIKOV = KernelSpec()


@dataclass(frozen=True)
class LinearFit:
    """Weighted least-squares solution; the intercept, when present, is the
    first coefficient (callers put the 1s column first)."""

    coefficients: np.ndarray
    ridged: bool = False

    def predict(self, design: np.ndarray) -> np.ndarray:
        return np.asarray(design, dtype=float) @ self.coefficients


@dataclass(frozen=True)
class LogisticFit:
    """Maximum-likelihood logistic fit via IRLS."""

    coefficients: np.ndarray
    converged: bool
    iterations: int

    def predict_proba(self, design: np.ndarray) -> np.ndarray:
        p = expit(np.asarray(design, dtype=float) @ self.coefficients)
        return np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)


def expit(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _solve_normal_equations(xtwx: np.ndarray, xtwy: np.ndarray) -> tuple[np.ndarray, bool]:
    """Solve a PSD normal system by Cholesky, adding the documented ridge
    jitter 1e-8 * trace/q when the matrix is numerically singular."""
    q = xtwx.shape[0]
    mat = xtwx
    ridged = False
    for attempt in range(_WLS_MAX_CHOLESKY_RETRIES + 1):
        try:
            chol = np.linalg.cholesky(mat)
        except np.linalg.LinAlgError:
            jitter = _RIDGE_REL * (np.trace(xtwx) / q)
            if jitter <= 0.0 or not np.isfinite(jitter):
                raise FitError("normal matrix has nonpositive trace; design is degenerate")
            mat = mat + (jitter * 10.0**attempt) * np.eye(q)
            ridged = True
            continue
        beta = _cho_solve(chol, xtwy)
        return beta, ridged
    raise FitError("normal matrix remained singular after ridge jitter")


def _cho_solve(chol: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    from numpy.linalg import solve

    # Two triangular solves; numpy lacks a dedicated triangular solver in its
    # public API so fall back to generic solve on the factors.
    y = solve(chol, rhs)
    return solve(chol.T, y)


def fit_wls(design: np.ndarray, response: np.ndarray, weights: np.ndarray) -> LinearFit:
    """Minimize sum_i w_i (y_i - x_i . beta)^2.

    Parameters
    ----------
    design : (n, q) array
    response : (n,) array
    weights : (n,) array of nonnegative weights, not all zero.

    Returns
    -------
    LinearFit
        ``ridged`` is set when a singular normal matrix required the
        1e-8 * trace/q jitter.
    """
    x = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    w = np.asarray(weights, dtype=float)
    if x.ndim != 2:
        raise FitError("design must be a 2-D matrix")
    n, q = x.shape
    if y.shape != (n,) or w.shape != (n,):
        raise FitError(f"dimension mismatch: design {x.shape}, response {y.shape}, weights {w.shape}")
    if q > n:
        raise FitError(f"more columns ({q}) than rows ({n})")
    if np.any(w < 0):
        raise FitError("weights must be nonnegative")
    if not np.any(w > 0):
        raise FitError("weights are all zero")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.all(np.isfinite(w))):
        raise FitError("non-finite value in WLS inputs")

    wx = x * w[:, None]
    xtwx = x.T @ wx
    xtwy = wx.T @ y
    beta, ridged = _solve_normal_equations(xtwx, xtwy)
    return LinearFit(coefficients=beta, ridged=ridged)


def fit_logistic(
    design: np.ndarray,
    labels: np.ndarray,
    sample_weight: np.ndarray | None = None,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> LogisticFit:
    """IRLS maximum-likelihood logistic regression.

    Convergence is declared when the largest coefficient change drops below
    ``tol``; otherwise the fit stops at ``max_iter`` with ``converged=False``
    (the separable-data case). Predictions are always clipped into
    [PROB_CLIP, 1 - PROB_CLIP].
    """
    x = np.asarray(design, dtype=float)
    y = np.asarray(labels, dtype=float)
    n, q = x.shape
    if y.shape != (n,):
        raise FitError("labels do not match design rows")
    if not np.all(np.isfinite(x)):
        raise FitError("non-finite value in logistic design")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise FitError("labels must be binary 0/1")
    w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    pos = float(np.sum(w * y))
    tot = float(np.sum(w))
    if pos <= 0.0 or pos >= tot:
        raise FitError("both label classes must be present (with positive weight)")
    if q > n:
        raise FitError(f"more columns ({q}) than rows ({n})")

    beta = np.zeros(q)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p = expit(x @ beta)
        p = np.clip(p, 1e-10, 1.0 - 1e-10)
        irls_w = w * p * (1.0 - p)
        score = x.T @ (w * (y - p))
        hess = x.T @ (x * irls_w[:, None])
        step, _ = _solve_normal_equations(hess, score)
        beta = beta + step
        if np.max(np.abs(step)) < tol:
            converged = True
            break
    return LogisticFit(coefficients=beta, converged=converged, iterations=it)


def local_linear_fit(
    xs: np.ndarray,
    ys: np.ndarray,
    h: float,
    delta: float,
    kernel: KernelSpec = EPANECHNIKOV,
    sample_weight: np.ndarray | None = None,
) -> tuple[float, float]:
    """Local linear regression of ``ys`` on ``xs`` at target ``delta``.

    Fits weighted least squares of y on (1, (x - delta)/h) with weights
    kernel((x - delta)/h), optionally multiplied by per-point sample weights.
    The intercept is the curve estimate at ``delta``; the slope is in
    rescaled (x - delta)/h units.

    Raises
    ------
    BandwidthError
        If fewer than two points carry positive kernel weight.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if h <= 0 or not np.isfinite(h):
        raise BandwidthError(f"bandwidth must be positive, got {h}", delta=delta)
    u = (x - delta) / h
    k = kernel(u)
    inside = k > 0.0
    if int(np.count_nonzero(inside)) < 2:
        raise BandwidthError(
            f"fewer than 2 points inside the kernel window at delta={delta} with h={h}",
            delta=delta,
        )
    w = k if sample_weight is None else k * np.asarray(sample_weight, dtype=float)
    ui = u[inside]
    design = np.column_stack([np.ones(ui.shape[0]), ui])
    fit = fit_wls(design, y[inside], w[inside])
    return float(fit.coefficients[0]), float(fit.coefficients[1])


def default_bandwidth_grid(xs: np.ndarray, size: int = 20) -> np.ndarray:
    """Log-spaced candidate bandwidths from 0.5 to 4 times sigma * n^(-1/5).

    The n^(-1/5) scaling keeps the default grid inside the h -> 0,
    n h^3 -> infinity regime required for consistency of the local linear
    smoother.
    """
    x = np.asarray(xs, dtype=float)
    n = x.shape[0]
    if n < 2:
        raise BandwidthError("need at least 2 points to build a bandwidth grid")
    sigma = float(np.std(x, ddof=1))
    if sigma <= 0.0:
        raise BandwidthError("zero spread in xs; no meaningful bandwidth grid")
    scale = sigma * n ** (-0.2)
    return np.geomspace(0.5 * scale, 4.0 * scale, size)


def _loo_zero_tolerance(ys: np.ndarray, weights: np.ndarray) -> float:
    # Scores below (1e-10 * max|y|)^2 * sum(w) are rounding junk from an
    # interpolating fit; treating them as exact zeros makes the smallest-h
    # tie rule deterministic in the noiseless regime.
    scale = float(np.max(np.abs(ys))) if ys.size else 0.0
    return (1e-10 * scale) ** 2 * float(np.sum(weights))


def select_bandwidth(
    xs: np.ndarray,
    ys: np.ndarray,
    grid: np.ndarray | None = None,
    kernel: KernelSpec = EPANECHNIKOV,
    sample_weight: np.ndarray | None = None,
) -> float:
    """Pick the candidate bandwidth minimizing leave-one-out squared error.

    For each candidate h the exact leave-one-out local linear prediction is
    computed at every point; candidates for which any leave-one-out fit is
    infeasible (fewer than two remaining in-window points) are skipped.
    Scores below the interpolation tolerance (see ``_loo_zero_tolerance``)
    count as exact zeros, and ties go to the smaller bandwidth.

    Raises
    ------
    BandwidthError
        If every candidate fails.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    n = x.shape[0]
    w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    if grid is None:
        grid = default_bandwidth_grid(x)
    cand = np.unique(np.asarray(grid, dtype=float))
    if cand.size == 0:
        raise BandwidthError("empty bandwidth grid")
    if np.any(cand <= 0.0):
        raise BandwidthError("bandwidth candidates must be positive")

    order = np.argsort(x, kind="stable")
    xo = x[order]
    yo = y[order]
    wo = w[order]
    xc = xo - float(np.mean(xo))  # centering bounds the moment magnitudes

    # Prefix sums of weighted monomials; windowed moments are differences.
    powers = [wo * xc**k for k in range(5)]
    pref = [np.concatenate([[0.0], np.cumsum(p)]) for p in powers]
    qowers = [wo * yo * xc**k for k in range(4)]
    qref = [np.concatenate([[0.0], np.cumsum(p)]) for p in qowers]

    zero_tol = _loo_zero_tolerance(yo, wo)
    best_h = None
    best_score = np.inf
    for h in cand:
        score = _loo_score_one(xc, yo, wo, float(h), pref, qref, kernel)
        if score is None:
            continue
        if score < zero_tol:
            score = 0.0
        if score < best_score:
            best_score = score
            best_h = float(h)
    if best_h is None:
        raise BandwidthError("no feasible bandwidth candidate (all leave-one-out fits failed)")
    return best_h


def _loo_score_one(xc, yo, wo, h, pref, qref, kernel):
    """Exact weighted LOO score for one candidate, or None if infeasible."""
    n = xc.shape[0]
    lo = np.searchsorted(xc, xc - h, side="left")
    hi = np.searchsorted(xc, xc + h, side="right")
    # Strictly interior points carry positive kernel weight; each LOO fit
    # needs two of them besides the held-out point itself.
    lo_s = np.searchsorted(xc, xc - h, side="right")
    hi_s = np.searchsorted(xc, xc + h, side="left")
    if np.any(hi_s - lo_s - 1 < 2):
        return None

    m = [p[hi] - p[lo] for p in pref]
    q = [p[hi] - p[lo] for p in qref]
    t = xc
    t2 = t * t
    a1 = m[1] - t * m[0]
    a2 = m[2] - 2.0 * t * m[1] + t2 * m[0]
    a3 = m[3] - 3.0 * t * m[2] + 3.0 * t2 * m[1] - t2 * t * m[0]
    a4 = m[4] - 4.0 * t * m[3] + 6.0 * t2 * m[2] - 4.0 * t2 * t * m[1] + t2 * t2 * m[0]
    b0 = q[0]
    b1 = q[1] - t * q[0]
    b2 = q[2] - 2.0 * t * q[1] + t2 * q[0]
    b3 = q[3] - 3.0 * t * q[2] + 3.0 * t2 * q[1] - t2 * t * q[0]

    h2 = h * h
    s0 = 0.75 * (m[0] - a2 / h2)
    s1 = 0.75 * (a1 - a3 / h2) / h
    s2 = 0.75 * (a2 - a4 / h2) / h2
    t0 = 0.75 * (b0 - b2 / h2)
    t1 = 0.75 * (b1 - b3 / h2) / h

    # Dropping point i only touches the zeroth-order sums (u_i = 0 there).
    s0_loo = s0 - 0.75 * wo
    t0_loo = t0 - 0.75 * wo * yo

    den = s0_loo * s2 - s1 * s1
    pred = np.empty(n)
    good = np.abs(den) > 1e-12 * np.abs(s0_loo * s2) + 1e-300
    pred[good] = (s2[good] * t0_loo[good] - s1[good] * t1[good]) / den[good]
    if not np.all(good):
        # Degenerate window (e.g. all duplicate x); defer to the literal fit,
        # which applies the ridge-jitter semantics.
        for i in np.nonzero(~good)[0]:
            keep = np.ones(n, dtype=bool)
            keep[i] = False
            try:
                pred[i], _ = local_linear_fit(
                    xc[keep], yo[keep], h, float(xc[i]), kernel, sample_weight=wo[keep]
                )
            except BandwidthError:
                return None
    resid = yo - pred
    return float(np.sum(wo * resid * resid))


def silverman_bandwidth(samples: np.ndarray, sample_weight: np.ndarray | None = None) -> float:
    """Silverman's rule of thumb, 1.06 * sigma * n^(-1/5).

    Sigma is the ddof-1 sample deviation; with weights, its frequency-weight
    analog (identical arithmetic when the weights are all ones, so weighted
    and unweighted calls agree bitwise on unit weights).
    """
    s = np.asarray(samples, dtype=float)
    n = s.shape[0]
    w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    wsum = np.sum(w)
    mu = np.sum(w * s) / wsum
    denom = wsum - np.sum(w * w) / wsum
    if denom <= 0.0:
        raise FitError("cannot form a bandwidth from fewer than 2 effective samples")
    sigma = float(np.sqrt(np.sum(w * (s - mu) ** 2) / denom))
    return 1.06 * sigma * n ** (-0.2)


@dataclass(frozen=True)
class DensityEstimate:
    """Gaussian kernel density over a fixed sample.

    Evaluates to a nonnegative density integrating to one (up to quadrature
    tolerance) over any range padded by a few bandwidths beyond the samples.
    """

    samples: np.ndarray
    bandwidth: float
    weights: np.ndarray = field(default=None)  # normalized to sum 1

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        if self.weights is None:
            w = np.full(self.samples.shape[0], 1.0 / self.samples.shape[0])
        else:
            w = np.asarray(self.weights, dtype=float)
            w = w / np.sum(w)
        object.__setattr__(self, "weights", w)

    def __call__(self, x) -> np.ndarray | float:
        xq = np.asarray(x, dtype=float)
        scalar = xq.ndim == 0
        flat = np.atleast_1d(xq).ravel()
        out = np.empty(flat.shape[0])
        bw = self.bandwidth
        norm = 1.0 / (bw * np.sqrt(2.0 * np.pi))
        # Chunked to bound the (n_eval x n_samples) intermediate.
        step = max(1, int(2_000_000 / max(1, self.samples.shape[0])))
        for start in range(0, flat.shape[0], step):
            z = (flat[start : start + step, None] - self.samples[None, :]) / bw
            out[start : start + step] = norm * (np.exp(-0.5 * z * z) @ self.weights)
        result = out.reshape(np.atleast_1d(xq).shape)
        return float(result[0]) if scalar else result


def gaussian_kde(
    samples: np.ndarray,
    bandwidth: float | None = None,
    sample_weight: np.ndarray | None = None,
) -> DensityEstimate:
    """Gaussian-kernel density estimate; Silverman's rule when ``bandwidth``
    is omitted."""
    s = np.asarray(samples, dtype=float)
    if s.ndim != 1 or s.shape[0] < 2:
        raise FitError("kernel density estimation needs at least 2 one-dimensional samples")
    if not np.all(np.isfinite(s)):
        raise FitError("non-finite sample passed to gaussian_kde")
    if bandwidth is None:
        bandwidth = silverman_bandwidth(s, sample_weight)
    if bandwidth <= 0.0 or not np.isfinite(bandwidth):
        raise FitError(f"kernel density bandwidth must be positive, got {bandwidth}")
    return DensityEstimate(samples=s, bandwidth=float(bandwidth), weights=sample_weight)
