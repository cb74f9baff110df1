"""Mixture density, likelihood and dataset round-trip checks.

Mixture values are verified against hand-assembled combinations of scipy's
own density evaluations, which never touch the package's kernel code.
"""

import numpy as np
import pytest
from scipy.stats import cauchy as cauchy_dist
from scipy.stats import norm as norm_dist

from deviate.exceptions import DomainError
from deviate.kernels import (
    GaussianFamily,
    GaussianFixedScaleFamily,
    gaussian_density,
    standard_cauchy_density,
)
from deviate.model import (
    DeviatedModel,
    DeviationParams,
    load_dataset,
    save_dataset,
)


def make_model():
    return DeviatedModel(standard_cauchy_density(1), GaussianFamily(1))


def test_mixture_density_matches_scipy_combination():
    model = make_model()
    params = DeviationParams(0.3, model.family.point(2.5, 0.25))
    xs = np.array([-3.0, 0.0, 1.0, 2.5, 7.0])
    want = 0.7 * cauchy_dist.pdf(xs) + 0.3 * norm_dist.pdf(xs, 2.5, 0.5)
    got = model.pdf(params, xs)
    assert np.abs(got - want).max() < 1e-14


def test_weight_edges_collapse_to_components():
    model = make_model()
    xs = np.linspace(-4.0, 4.0, 9)
    point = model.family.point(1.0, 2.0)
    at_zero = model.log_pdf(DeviationParams(0.0, point), xs)
    assert np.array_equal(at_zero, model.h0.log_pdf(xs))
    at_one = model.log_pdf(DeviationParams(1.0, point), xs)
    assert np.array_equal(at_one, model.family.log_pdf(xs, point))


def test_log_likelihood_matches_naive_sum():
    model = make_model()
    params = DeviationParams(0.45, model.family.point(-1.0, 0.5))
    x = model.sample(params, 300, np.random.default_rng(11))
    naive = float(np.sum(np.log(model.pdf(params, x))))
    assert abs(model.log_likelihood(params, x) - naive) < 1e-9 * abs(naive)


def test_log_likelihood_clamps_underflow_with_warning():
    h0 = gaussian_density(0.0, 1e-4)
    model = DeviatedModel(h0, GaussianFixedScaleFamily(1, 1e-4))
    params = DeviationParams(0.5, model.family.point(0.0))
    data = np.array([0.0, 50.0])  # second point underflows both branches
    with pytest.warns(RuntimeWarning, match="clamped at 1"):
        ll = model.log_likelihood(params, data)
    assert np.isfinite(ll)
    assert ll < model.log_pdf(params, np.array([0.0]))[0] + np.log(1e-290)


def test_weight_validation():
    point = GaussianFamily(1).point(0.0, 1.0)
    with pytest.raises(DomainError):
        DeviationParams(-0.1, point)
    with pytest.raises(DomainError):
        DeviationParams(1.2, point)
    with pytest.raises(DomainError):
        DeviationParams(np.nan, point)


def test_params_dict_round_trip():
    params = DeviationParams(0.25, GaussianFamily(1).point(1.5, 0.75))
    payload = params.to_dict()
    assert payload == {"lambda": 0.25, "mu": 1.5, "sigma": 0.75}
    back = DeviationParams.from_dict(payload)
    assert back.weight == params.weight
    assert back.point.close_to(params.point)


def test_sampler_labels_match_components():
    model = make_model()
    params = DeviationParams(0.35, model.family.point(4.0, 0.04))
    n = 50000
    x, labels = model.sample(params, n, np.random.default_rng(12), return_labels=True)
    frac = labels.mean()
    assert abs(frac - 0.35) < 4.0 * np.sqrt(0.35 * 0.65 / n)
    bump = x[labels].ravel()
    assert abs(bump.mean() - 4.0) < 0.01
    assert abs(bump.std() - 0.2) < 0.01
    rest = x[~labels].ravel()
    assert abs(np.median(rest)) < 0.03  # standard Cauchy median


def test_sampler_is_reproducible():
    model = make_model()
    params = DeviationParams(0.5, model.family.point(2.0, 1.0))
    a = model.sample(params, 100, np.random.default_rng(99))
    b = model.sample(params, 100, np.random.default_rng(99))
    assert np.array_equal(a, b)


def test_dataset_round_trip(tmp_path):
    model = make_model()
    params = DeviationParams(0.5, model.family.point(2.0, 1.0))
    x, labels = model.sample(params, 64, np.random.default_rng(3), return_labels=True)
    path = tmp_path / "data.csv"
    save_dataset(path, x, labels)
    back, back_labels = load_dataset(path)
    assert np.array_equal(back, x)
    assert np.array_equal(back_labels, labels)
    save_dataset(path, x)
    back, back_labels = load_dataset(path)
    assert np.array_equal(back, x) and back_labels is None


def test_dataset_round_trip_2d(tmp_path):
    rng = np.random.default_rng(4)
    x = rng.normal(size=(20, 2))
    path = tmp_path / "data2.csv"
    save_dataset(path, x)
    back, _ = load_dataset(path)
    assert np.array_equal(back, x)


def test_dataset_rejects_foreign_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1.0,2.0\n")
    with pytest.raises(ValueError, match="header"):
        load_dataset(path)


def test_model_dimension_mismatch():
    with pytest.raises(ValueError, match="dims disagree"):
        DeviatedModel(standard_cauchy_density(2), GaussianFamily(1))
