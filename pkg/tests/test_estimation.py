"""EM estimator checks: ascent, invariances, and agreement with a profile scan.

The profile check freezes the fitted bump point and sweeps the weight over a
dense grid computed straight from the mixture density, so the grid argmax is
an implementation-independent reference for the fitted weight.
"""

import numpy as np
import pytest

from deviate.estimation import EmConfig, em_fit, initial_points, profile_loglik_lambda
from deviate.kernels import (
    CauchyFamily,
    GaussianFamily,
    GaussianFixedScaleFamily,
    StudentTFamily,
    gaussian_density,
    standard_cauchy_density,
)
from deviate.model import DeviatedModel, DeviationParams


def cauchy_gauss_model():
    return DeviatedModel(standard_cauchy_density(1), GaussianFamily(1))


def simulate(model, weight, mu, var, n, seed):
    truth = DeviationParams(weight, model.family.point(mu, var))
    return truth, model.sample(truth, n, np.random.default_rng(seed))


def assert_monotone(trace, slack=1e-9):
    diffs = np.diff(np.asarray(trace))
    assert diffs.min(initial=0.0) >= -slack, f"worst drop {diffs.min():.3e}"


def test_recovers_well_separated_truth():
    model = cauchy_gauss_model()
    truth, x = simulate(model, 0.5, 2.5, 0.25, 4000, seed=21)
    fit = em_fit(model, x, rng=np.random.default_rng(1))
    assert abs(fit.params.weight - 0.5) < 0.05
    assert abs(float(fit.params.mu[0]) - 2.5) < 0.05
    assert abs(float(fit.params.sigma[0, 0]) - 0.25) < 0.05
    assert fit.converged
    assert_monotone(fit.trace)


def test_loglik_never_decreases_across_many_fits():
    model = cauchy_gauss_model()
    for seed in range(12):
        truth, x = simulate(model, 0.3 + 0.05 * seed % 0.7, 1.0, 0.5, 300, seed=seed)
        fit = em_fit(model, x, rng=np.random.default_rng(seed))
        assert_monotone(fit.trace)


def test_weight_edge_truths():
    model = cauchy_gauss_model()
    rng = np.random.default_rng(5)
    pure_h0 = model.h0.sample(2000, rng)
    fit = em_fit(model, pure_h0, rng=np.random.default_rng(2))
    assert fit.params.weight < 0.08
    pure_bump = model.family.sample(model.family.point(2.5, 0.25), 2000, rng)
    fit = em_fit(model, pure_bump, rng=np.random.default_rng(2))
    assert fit.params.weight > 0.92
    assert_monotone(fit.trace)


def test_row_shuffle_gives_bitwise_identical_fit():
    model = cauchy_gauss_model()
    _, x = simulate(model, 0.5, 2.0, 0.5, 500, seed=33)
    fit_a = em_fit(model, x, rng=np.random.default_rng(7))
    shuffled = x[np.random.default_rng(0).permutation(len(x))]
    fit_b = em_fit(model, shuffled, rng=np.random.default_rng(7))
    assert fit_a.params.weight == fit_b.params.weight
    assert np.array_equal(fit_a.params.mu, fit_b.params.mu)
    assert np.array_equal(fit_a.params.sigma, fit_b.params.sigma)
    assert fit_a.loglik == fit_b.loglik


def test_same_rng_gives_identical_fit():
    model = cauchy_gauss_model()
    _, x = simulate(model, 0.4, 1.5, 0.3, 400, seed=44)
    fit_a = em_fit(model, x, rng=np.random.default_rng(11))
    fit_b = em_fit(model, x, rng=np.random.default_rng(11))
    assert fit_a.loglik == fit_b.loglik
    assert np.array_equal(fit_a.trace, fit_b.trace)


def test_fitted_weight_agrees_with_profile_scan():
    model = cauchy_gauss_model()
    _, x = simulate(model, 0.5, 2.5, 0.25, 2000, seed=55)
    fit = em_fit(model, x, rng=np.random.default_rng(3))
    grid = np.linspace(0.0, 1.0, 1001)
    profile = profile_loglik_lambda(model, x, fit.params.point, grid)
    assert abs(grid[int(np.argmax(profile))] - fit.params.weight) <= 0.01
    assert profile.max() <= fit.loglik + 1e-6


def test_fixed_point_property_under_param_stopping():
    # rerunning EM from its own answer must stay put when stopping on moves
    model = cauchy_gauss_model()
    _, x = simulate(model, 0.5, 2.5, 0.25, 1000, seed=66)
    cfg = EmConfig(tol_param=1e-8, tol_loglik=0.0, max_iter=4000)
    fit = em_fit(model, x, cfg, rng=np.random.default_rng(4))
    again = em_fit(
        model, x, cfg, rng=np.random.default_rng(4),
        extra_inits=[(fit.params.weight, fit.params.point)],
    )
    assert again.loglik >= fit.loglik - 1e-7
    assert abs(again.params.weight - fit.params.weight) < 1e-4
    assert float(np.abs(again.params.mu - fit.params.mu).max()) < 1e-4


def test_fixed_sigma_family_never_moves_sigma():
    h0 = gaussian_density(0.0, 1.0)
    family = GaussianFixedScaleFamily(1, 1.0)
    model = DeviatedModel(h0, family)
    truth = DeviationParams(0.4, family.point(1.5))
    x = model.sample(truth, 1500, np.random.default_rng(8))
    fit = em_fit(model, x, rng=np.random.default_rng(8))
    assert float(fit.params.sigma[0, 0]) == 1.0
    assert abs(float(fit.params.mu[0]) - 1.5) < 0.25
    assert_monotone(fit.trace)


def test_numeric_mstep_handles_student_t_bump():
    h0 = gaussian_density(0.0, 1.0)
    model = DeviatedModel(h0, StudentTFamily(1, 3))
    truth = DeviationParams(0.5, model.family.point(4.0, 0.5))
    x = model.sample(truth, 1500, np.random.default_rng(9))
    cfg = EmConfig(m_step_mode="numeric_ascent", n_restarts=4)
    fit = em_fit(model, x, cfg, rng=np.random.default_rng(9))
    assert abs(float(fit.params.mu[0]) - 4.0) < 0.2
    assert abs(fit.params.weight - 0.5) < 0.06
    assert_monotone(fit.trace)


def test_closed_form_mstep_rejects_heavy_tailed_family():
    model = DeviatedModel(gaussian_density(0.0, 1.0), CauchyFamily(1))
    x = np.linspace(-2.0, 2.0, 50)
    with pytest.raises(ValueError, match="numeric_ascent"):
        em_fit(model, x, EmConfig(m_step_mode="closed_form_gaussian"))


def test_degenerate_bump_is_flagged():
    # data deep in the h0 bulk with the bump frozen far away and sigma fixed:
    # responsibilities vanish and the weight collapses to zero
    h0 = gaussian_density(0.0, 1.0)
    family = GaussianFixedScaleFamily(1, 1e-4)
    model = DeviatedModel(h0, family)
    x = np.random.default_rng(10).normal(size=500)
    cfg = EmConfig(n_restarts=0, scan_init=False, max_iter=50)
    fit = em_fit(
        model, x, cfg, rng=np.random.default_rng(1),
        extra_inits=[(0.5, family.point(60.0))],
    )
    assert fit.degenerate
    assert fit.params.weight == 0.0
    assert np.isfinite(fit.loglik)


def test_initial_points_are_data_order_invariant():
    model = cauchy_gauss_model()
    _, x = simulate(model, 0.5, 2.0, 0.5, 200, seed=12)
    cfg = EmConfig()
    a = initial_points(model, np.sort(x, axis=0), cfg, np.random.default_rng(2))
    b = initial_points(model, np.sort(x, axis=0), cfg, np.random.default_rng(2))
    assert len(a) == cfg.n_restarts + 1
    for (wa, pa), (wb, pb) in zip(a, b):
        assert wa == wb and pa.close_to(pb)


def test_input_validation():
    model = cauchy_gauss_model()
    with pytest.raises(ValueError, match="at least two"):
        em_fit(model, np.array([1.0]))
    with pytest.raises(ValueError, match="does not match"):
        em_fit(model, np.zeros((10, 2)))
    with pytest.raises(ValueError):
        profile_loglik_lambda(
            model, np.zeros(5), model.family.point(0.0, 1.0), [-0.1, 0.5]
        )
