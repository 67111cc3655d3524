import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskopt.kriging import (DimensionMismatch, DuplicatePoint, ExperimentalDesign, KrigingModel,
                             add_point, fit, gaussian_corr, matern52, predict, raw_variance_bracket,
                             reduced_likelihood)
from riskopt.numerics import Bounds, lhs_sample


def branin_like(x):
    return np.sin(3 * x[:, 0]) * np.cos(2 * x[:, 1]) + 0.5 * x[:, 0] ** 2


@pytest.fixture(scope="module")
def model2d():
    x = lhs_sample(20, Bounds([0.0, 0.0], [2.0, 1.0]), 3)
    return fit(ExperimentalDesign(x, branin_like(x)), seed=1)


def test_matern_closed_form():
    assert matern52([0.3, 0.2], [0.3, 0.2], [1.0, 2.0]) == 1.0
    expected = (1 + np.sqrt(5) + 5 / 3) * np.exp(-np.sqrt(5))
    assert matern52([0.0], [0.7], [0.7]) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(0.5239941, abs=1e-6)
    a = matern52([0.1], [0.5], [0.3]) * matern52([1.0], [0.2], [0.9])
    assert matern52([0.1, 1.0], [0.5, 0.2], [0.3, 0.9]) == pytest.approx(a, rel=1e-14)
    assert gaussian_corr([0.0], [1.0], [2.0]) == pytest.approx(np.exp(-0.25))


def test_design_validation():
    with pytest.raises(ValueError):
        ExperimentalDesign(np.array([[0.0]]), np.array([1.0]))
    with pytest.raises(DuplicatePoint):
        ExperimentalDesign(np.array([[0.0], [0.0]]), np.array([1.0, 2.0]))


def test_two_points_interpolate():
    d = ExperimentalDesign(np.array([[0.0], [1.0]]), np.array([2.0, -1.0]))
    m = fit(d)
    np.testing.assert_allclose(predict(m, d.points).mean, d.responses, atol=1e-8)


def test_sine_fit_accuracy():
    x = np.linspace(0, 2 * np.pi, 8)[:, None]
    m = fit(ExperimentalDesign(x, np.sin(x[:, 0])), seed=0)
    grid = np.linspace(0, 2 * np.pi, 2001)[:, None]
    assert np.max(np.abs(predict(m, grid).mean - np.sin(grid[:, 0]))) < 0.05


def test_constant_responses_degenerate():
    x = lhs_sample(6, Bounds([0.0, 0.0], [1.0, 1.0]), 0)
    m = fit(ExperimentalDesign(x, np.full(6, 3.0)))
    assert m.degenerate
    p = predict(m, lhs_sample(50, Bounds([0.0, 0.0], [1.0, 1.0]), 1))
    np.testing.assert_allclose(p.mean, 3.0)
    assert np.all(p.variance < 1e-12)


def test_interpolation_invariant(model2d):
    d = model2d.design
    p = predict(model2d, d.points)
    assert np.all(np.abs(p.mean - d.responses) <= 1e-8 * (1 + np.abs(d.responses)))
    assert np.all(p.variance <= 1e-8 * model2d.sigma2 * model2d.output_scale**2)


def test_far_field_limit(model2d):
    p = predict(model2d, np.array([[1e3, -1e3]]))
    assert p.mean[0] == pytest.approx(model2d.beta, rel=1e-10)
    assert p.variance[0] >= 0.99 * model2d.sigma2


def test_variance_bracket_roundoff(model2d):
    x = lhs_sample(5000, Bounds([0.0, 0.0], [2.0, 1.0]), 8)
    raw = raw_variance_bracket(model2d, np.vstack([x, model2d.design.points]))
    assert raw.min() >= -1e-9
    assert np.all(predict(model2d, x).variance >= 0)


def test_batch_equals_pointwise(model2d):
    x = lhs_sample(100_000, Bounds([0.0, 0.0], [2.0, 1.0]), 4)
    batch = predict(model2d, x)
    idx = np.random.default_rng(0).choice(len(x), 300, replace=False)
    for i in idx:
        single = predict(model2d, x[i])
        assert single.mean.tobytes() == batch.mean[i].tobytes()
        assert single.variance.tobytes() == batch.variance[i].tobytes()


def test_dimension_mismatch(model2d):
    with pytest.raises(DimensionMismatch):
        predict(model2d, np.zeros((3, 3)))


def test_likelihood_optimality_on_grid(model2d):
    u = model2d.normalized_points()
    z = (model2d.design.responses - model2d.output_shift) / model2d.output_scale
    best = reduced_likelihood(u, z, model2d.theta)
    grid = np.logspace(-3, 2, 10)
    for a in grid:
        for b in grid:
            assert best <= reduced_likelihood(u, z, np.array([a, b])) * (1 + 1e-9)


def test_affine_equivariance(model2d):
    d = model2d.design
    scale, shift = np.array([3.0, 0.5]), np.array([-2.0, 10.0])
    m2 = fit(ExperimentalDesign(d.points * scale + shift, d.responses), seed=1)
    x = lhs_sample(200, Bounds([0.0, 0.0], [2.0, 1.0]), 6)
    p1 = predict(model2d, x)
    p2 = predict(m2, x * scale + shift)
    np.testing.assert_allclose(p2.mean, p1.mean, rtol=1e-6, atol=1e-6 * np.abs(p1.mean).max())
    np.testing.assert_allclose(m2.theta, model2d.theta, rtol=1e-3)


def test_add_point(model2d):
    x_new = np.array([1.37, 0.61])
    m = add_point(model2d, x_new, 0.25)
    assert m.n == model2d.n + 1
    assert predict(m, x_new).mean == pytest.approx(0.25, abs=1e-8)
    with pytest.raises(DuplicatePoint):
        add_point(m, x_new, 1.0)


def test_add_implied_point_reduces_max_variance():
    x = lhs_sample(8, Bounds([0.0], [1.0]), 2)
    m = fit(ExperimentalDesign(x, np.sin(4 * x[:, 0])), seed=0)
    grid = np.linspace(0, 1, 401)[:, None]
    v0 = predict(m, grid).variance
    x_new = grid[np.argmax(v0)]
    m2 = add_point(m, x_new, predict(m, x_new).mean)
    assert predict(m2, grid).variance.max() <= v0.max() * (1 + 1e-9)


def test_n_grows_and_json_roundtrip(tmp_path):
    x = lhs_sample(5, Bounds([0.0, 0.0], [1.0, 1.0]), 0)
    m = fit(ExperimentalDesign(x, x.sum(axis=1) ** 2))
    m2 = add_point(m, np.array([0.5, 0.123]), 0.386)
    assert (m.n, m2.n) == (5, 6)
    path = tmp_path / "model.json"
    m2.to_json(path)
    back = KrigingModel.from_json(path)
    q = lhs_sample(100, Bounds([0.0, 0.0], [1.0, 1.0]), 1)
    assert predict(back, q).mean.tobytes() == predict(m2, q).mean.tobytes()
    assert json.loads(path.read_text())["corr_family"] == "matern52"


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(3, 15))
def test_interpolation_property_random(seed, n):
    rng = np.random.default_rng(seed)
    x = rng.random((n, 2))
    y = rng.standard_normal(n)
    m = fit(ExperimentalDesign(x, y), n_starts=2, seed=seed)
    p = predict(m, x)
    assert np.all(np.abs(p.mean - y) <= 1e-8 * (1 + np.abs(y)))
