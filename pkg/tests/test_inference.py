"""Sandwich variance and weighted bootstrap contracts."""

import numpy as np
import pytest

from dosedid.curves import EstimatorConfig, estimate_curve
from dosedid.data import TwoPeriodDataset
from dosedid.errors import EstimationError
from dosedid.inference import (
    bootstrap_weights,
    build_estimating_system,
    sandwich_bands,
    sandwich_variance,
    stacked_sandwich_variance,
    weighted_bootstrap,
)
from dosedid.nuisance import NuisanceSpec, default_specs, fit_nuisances
from dosedid.pseudo import build_pseudo_outcomes
from dosedid.simulation import generate_scenario_data, stream_seed

SPECS = default_specs(mu1_dose_powers=(1, 3), mu1_dose_interactions=(0, 2))


@pytest.fixture(scope="module")
def fitted():
    data = generate_scenario_data(400, stream_seed(400, 0, 0))
    models = fit_nuisances(data, SPECS)
    curve = estimate_curve(data, "MR", specs=SPECS)
    return data, models, curve


def test_estimating_equations_vanish_at_solution(fitted):
    data, models, curve = fitted
    for delta in (curve.grid[3], curve.grid[25], curve.grid[-4]):
        system = build_estimating_system(data, models, curve, float(delta))
        sums = system.gamma.sum(axis=0)
        scales = np.abs(system.gamma).mean(axis=0) + 1e-12
        assert np.all(np.abs(sums) <= 1e-6 * data.n * scales)


def test_sandwich_covariance_symmetric_psd(fitted):
    data, models, curve = fitted
    system = build_estimating_system(data, models, curve, float(curve.grid[10]))
    v = system.covariance()
    assert np.max(np.abs(v - v.T)) < 1e-10 * max(1.0, np.max(np.abs(v)))
    eig = np.linalg.eigvalsh(0.5 * (v + v.T))
    assert eig.min() > -1e-10 * max(1.0, eig.max())


def test_theta0_block_matches_closed_form_oracle(fitted):
    data, models, curve = fitted
    system = build_estimating_system(data, models, curve, float(curve.grid[20]))
    v = system.covariance()

    # independent direct formulas for the self-normalized group means
    pseudo = build_pseudo_outcomes(data, models)
    resid_c = (data.y1 - data.y0 - models.mu0(data.x))[~data.a]
    n0 = data.n_control
    na = data.n_treated
    psi3 = pseudo.w0 * resid_c - pseudo.theta00
    var_theta00 = float(psi3 @ psi3) / n0**2
    mu0_t = models.mu0(data.x)[data.a]
    psi4 = mu0_t - pseudo.theta01
    var_theta01 = float(psi4 @ psi4) / na**2
    assert abs(v[2, 2] - var_theta00) < 1e-8 * max(1.0, var_theta00)
    assert abs(v[3, 3] - var_theta01) < 1e-8 * max(1.0, var_theta01)
    assert abs(v[2, 3]) < 1e-14  # disjoint samples


def test_full_system_matches_hand_loops_on_tiny_data(fitted):
    """Independently rebuild Gamma/bread/meat with plain loops on a small
    dataset and compare the final variance."""
    data_full, _, _ = fitted
    idx = np.concatenate([np.nonzero(data_full.a)[0][:12], np.nonzero(~data_full.a)[0][:10]])
    data = TwoPeriodDataset.from_arrays(
        x=data_full.x[idx],
        a=data_full.a[idx],
        dose=data_full.dose[:12],
        y0=data_full.y0[idx],
        y1=data_full.y1[idx],
    )
    models = fit_nuisances(data, SPECS, dose_grid=np.linspace(data.dose.min(), data.dose.max(), 9))
    h = 2.0 * np.ptp(data.dose)
    curve = estimate_curve(data, "MR", specs=SPECS, grid=np.sort(data.dose[:3]), bandwidth=h, models=models)
    delta = float(curve.grid[1])
    system = build_estimating_system(data, models, curve, delta)

    # hand loops
    pseudo = build_pseudo_outcomes(data, models)
    theta, beta, theta00, theta01 = system.eta
    nodes = models.dose_nodes
    tw = np.gradient(nodes)  # simple trapezoid-equivalent on interior
    tw[0] = (nodes[1] - nodes[0]) / 2
    tw[-1] = (nodes[-1] - nodes[-2]) / 2
    f_vals = models.f_marginal(nodes, count_clamps=False)
    m_vals = models.m_marginal(nodes, count_clamps=False)
    p_hat = data.n_treated / data.n
    gamma = np.zeros((data.n, 4))
    t_pos = 0
    for i in range(data.n):
        if data.a[i]:
            d_i = data.dose[t_pos]
            xi_i = pseudo.xi[t_pos]
            u = (d_i - delta) / h
            k = 0.75 * max(1 - u * u, 0.0) if abs(u) <= 1 else 0.0
            c0 = c1 = 0.0
            for j, node in enumerate(nodes):
                un = (node - delta) / h
                kn = 0.75 * max(1 - un * un, 0.0) if abs(un) <= 1 else 0.0
                dev = float(models.mu1(node, data.x[i][None, :])[0]) - m_vals[j]
                c0 += tw[j] * kn * dev * f_vals[j]
                c1 += tw[j] * kn * un * dev * f_vals[j]
            gamma[i, 0] = (k * (xi_i - theta - u * beta) + c0) / p_hat
            gamma[i, 1] = (k * u * (xi_i - theta - u * beta) + c1) / p_hat
            gamma[i, 3] = float(models.mu0(data.x[i][None, :])[0]) - theta01
            t_pos += 1
        else:
            pa = float(models.pi_a(data.x[i][None, :])[0])
            w0_raw = pa / (1 - pa)
            resid = data.y1[i] - data.y0[i] - float(models.mu0(data.x[i][None, :])[0])
            gamma[i, 2] = w0_raw / _w0_mean(data, models) * resid - theta00
    np.testing.assert_allclose(gamma, system.gamma, atol=1e-10)
    np.testing.assert_allclose(system.meat, gamma.T @ gamma, atol=1e-9)
    binv = np.linalg.inv(system.bread)
    v_hand = binv @ (gamma.T @ gamma) @ binv.T
    contrast = np.array([1.0, 0.0, -1.0, -1.0])
    var_hand = float(contrast @ v_hand @ contrast)
    assert abs(sandwich_variance(data, models, curve, delta) - var_hand) < 1e-10 * max(1.0, var_hand)


def _w0_mean(data, models):
    pa = models.pi_a(data.x)[~data.a]
    return float(np.mean(pa / (1 - pa)))


def test_duplication_halves_variance():
    data = generate_scenario_data(300, stream_seed(400, 1, 0))
    specs = default_specs(mu1_dose_powers=(1, 3), mu1_dose_interactions=(0, 2))
    specs["pi_d"] = NuisanceSpec("pi_d", "linear", kde_bandwidth=0.35)
    grid = np.linspace(np.percentile(data.dose, 20), np.percentile(data.dose, 80), 9)
    h = 1.4

    doubled = TwoPeriodDataset.from_arrays(
        x=np.vstack([data.x, data.x]),
        a=np.concatenate([data.a, data.a]),
        dose=np.concatenate([data.dose, data.dose]),
        y0=np.concatenate([data.y0, data.y0]),
        y1=np.concatenate([data.y1, data.y1]),
    )
    delta = float(grid[4])
    v1 = _var_at(data, specs, grid, h, delta)
    v2 = _var_at(doubled, specs, grid, h, delta)
    assert abs(v2 - v1 / 2.0) < 1e-8 * v1


def _var_at(data, specs, grid, h, delta):
    models = fit_nuisances(data, specs, dose_grid=grid)
    curve = estimate_curve(data, "MR", specs=specs, grid=grid, bandwidth=h, models=models)
    return sandwich_variance(data, models, curve, delta)


def test_stacked_single_period_equals_base(fitted):
    data, models, curve = fitted
    delta = float(curve.grid[14])
    base = sandwich_variance(data, models, curve, delta, mode="base")
    stacked = stacked_sandwich_variance([(data, models, curve)], delta)
    assert stacked == base


def test_augmented_mode_runs_and_vanishes():
    data = generate_scenario_data(200, stream_seed(400, 2, 0))
    models = fit_nuisances(data, SPECS)
    curve = estimate_curve(data, "MR", specs=SPECS)
    delta = float(curve.grid[25])
    system = build_estimating_system(data, models, curve, delta, mode="augmented")
    sums = system.gamma.sum(axis=0)
    scales = np.abs(system.gamma).mean(axis=0) + 1e-9
    assert np.all(np.abs(sums) <= 1e-5 * data.n * scales)
    var_aug = sandwich_variance(data, models, curve, delta, mode="augmented")
    var_base = sandwich_variance(data, models, curve, delta, mode="base")
    assert np.isfinite(var_aug) and var_aug >= 0.0
    assert var_aug < 50 * var_base  # same order of magnitude


def test_augmented_mode_rejects_flexible_learners():
    data = generate_scenario_data(200, stream_seed(400, 3, 0))
    specs = dict(SPECS)
    specs["mu0"] = NuisanceSpec("mu0", "flexible-additive")
    models = fit_nuisances(data, specs)
    curve = estimate_curve(data, "MR", specs=specs)
    with pytest.raises(EstimationError):
        sandwich_variance(data, models, curve, float(curve.grid[0]), mode="augmented")


def test_sandwich_requires_mr(fitted):
    data, models, _ = fitted
    naive = estimate_curve(data, "NAIVE")
    with pytest.raises(EstimationError):
        sandwich_variance(data, models, naive, float(naive.grid[0]))


# ---------------------------------------------------------------- bootstrap


def test_bootstrap_weights_group_sums():
    data = generate_scenario_data(250, stream_seed(400, 4, 0))
    for b in range(5):
        w = bootstrap_weights(data.a, 77, b)
        assert abs(w[data.a].sum() - data.n_treated) < 1e-10
        assert abs(w[~data.a].sum() - data.n_control) < 1e-10
        assert np.all(w > 0)


def test_bootstrap_weights_counter_based():
    a = np.zeros(40, dtype=bool)
    a[:17] = True
    w5 = bootstrap_weights(a, 9, 5)
    np.testing.assert_array_equal(bootstrap_weights(a, 9, 5), w5)
    assert not np.array_equal(bootstrap_weights(a, 9, 6), w5)
    assert not np.array_equal(bootstrap_weights(a, 10, 5), w5)


def test_forced_unit_weights_reproduce_point_estimate_bitwise():
    data = generate_scenario_data(300, stream_seed(400, 5, 0))
    point = estimate_curve(data, "MR", specs=SPECS)
    cfg = EstimatorConfig(method="MR", specs=SPECS, grid=point.grid, bandwidth=point.bandwidth)
    result = weighted_bootstrap(
        data, cfg, 3, seed=0, keep_curves=True, weight_fn=lambda b: np.ones(data.n)
    )
    assert result.b_failed == 0
    for row in result.curves:
        np.testing.assert_array_equal(row, point.psi)


def test_bootstrap_deterministic_and_percentile():
    data = generate_scenario_data(240, stream_seed(400, 6, 0))
    point = estimate_curve(data, "MR", specs=SPECS)
    cfg = EstimatorConfig(
        method="MR", specs=SPECS, grid=point.grid, bandwidth=point.bandwidth, on_out_of_range="clamp"
    )
    r1 = weighted_bootstrap(data, cfg, 24, seed=5, keep_curves=True)
    r2 = weighted_bootstrap(data, cfg, 24, seed=5, keep_curves=True)
    np.testing.assert_array_equal(r1.curves, r2.curves)
    np.testing.assert_array_equal(r1.ci_lower, r2.ci_lower)
    lo, hi = np.percentile(r1.curves, [2.5, 97.5], axis=0)
    np.testing.assert_array_equal(r1.ci_lower, lo)
    np.testing.assert_array_equal(r1.ci_upper, hi)
    assert not r1.flagged


def test_bootstrap_needs_two_replicates(fitted):
    data, _, curve = fitted
    cfg = EstimatorConfig(method="NAIVE", grid=curve.grid, bandwidth=curve.bandwidth)
    with pytest.raises(EstimationError):
        weighted_bootstrap(data, cfg, 1, seed=0)
    with pytest.raises(EstimationError):
        weighted_bootstrap(data, EstimatorConfig(method="NAIVE"), 5, seed=0)


def test_bootstrap_width_close_to_sandwich_width():
    data = generate_scenario_data(1000, stream_seed(400, 7, 0))
    models = fit_nuisances(data, SPECS)
    curve = estimate_curve(data, "MR", specs=SPECS, models=models)
    lo, hi, _ = sandwich_bands(data, models, curve)
    cfg = EstimatorConfig(
        method="MR", specs=SPECS, grid=curve.grid, bandwidth=curve.bandwidth, on_out_of_range="clamp"
    )
    boot = weighted_bootstrap(data, cfg, 500, seed=11)
    k = curve.grid.shape[0] // 2
    sand_width = hi[k] - lo[k]
    boot_width = boot.ci_upper[k] - boot.ci_lower[k]
    assert abs(boot_width - sand_width) < 0.25 * sand_width
