import numpy as np
import pytest
from scipy.stats import spearmanr

from riskopt.numerics import MarginalDistribution
from riskopt.process import (Deterministic, GaussianProcessSpec, PulseProcess, PulseProcessSpec,
                             RandomVariable, TimeOutOfRange, TrajectoryBatch, build_eole,
                             default_node_count, degradation_depth, sample_gp_trajectories,
                             sample_pulse_segments, sample_pulse_trajectories, uniform_times)

MONTH = 1.0 / 12.0


def test_perfect_correlation_rank_one():
    spec = GaussianProcessSpec(0.0, 1.0, 1e4, 1.0)
    exp = build_eole(spec, node_count=6)
    assert exp.order == 1
    assert exp.eigvals[0] == pytest.approx(6.0, rel=1e-6)


def test_white_noise_limit_full_order():
    spec = GaussianProcessSpec(0.0, 1.0, 1e-3, 1.0)
    exp = build_eole(spec, node_count=8, eps=0.1)
    assert exp.order == 8


def test_paper_load_process_trace_bound():
    spec = GaussianProcessSpec(6000.0, 1800.0, MONTH, 10.0)
    exp = build_eole(spec, eps=1e-3)
    assert default_node_count(spec) == 241
    assert exp.nodes[1] - exp.nodes[0] == pytest.approx(MONTH / 2)
    assert exp.eigvals.sum() / np.trace(exp.corr_matrix_nodes) >= 0.999
    assert exp.eigvals[:-1].sum() / np.trace(exp.corr_matrix_nodes) < 0.999
    v = exp.eigvecs
    np.testing.assert_allclose(v.T @ v, np.eye(exp.order), atol=1e-10)


def test_node_variance_reconstruction():
    spec = GaussianProcessSpec(1.0, 2.0, 0.4, 2.0)
    p = 11
    exp = build_eole(spec, node_count=p, eps=1e-12)
    n = 10_000
    batch = sample_gp_trajectories(exp, n, exp.nodes, seed=3)
    var = batch.values.var(axis=0, ddof=1)
    se = 4.0 * np.sqrt(2.0 / (n - 1))
    assert np.all(np.abs(var - 4.0) <= 3 * se)
    assert np.all(np.abs(batch.values.mean(axis=0) - 1.0) < 4 * 2.0 / np.sqrt(n))


def test_truncation_bias_nonpositive():
    spec = GaussianProcessSpec(0.0, 1.0, MONTH, 1.0)
    exp = build_eole(spec, eps=1e-2)
    t = np.linspace(0, 1, 97)
    assert np.all(exp.variance_ratio(t) <= 1 + 1e-9)


def test_zero_weights_give_mean_and_determinism():
    spec = GaussianProcessSpec(lambda t: 2.0 + t, 1.0, 0.5, 3.0)
    exp = build_eole(spec)
    t = uniform_times(3.0, 0.25)
    b = sample_gp_trajectories(exp, 4, t, xi=np.zeros((4, exp.order)))
    np.testing.assert_array_equal(b.values, np.broadcast_to(2.0 + t, (4, t.size)))
    a1 = sample_gp_trajectories(exp, 5, t, seed=9).values
    a2 = sample_gp_trajectories(exp, 5, t, seed=9).values
    assert a1.tobytes() == a2.tobytes()
    with pytest.raises(TimeOutOfRange):
        sample_gp_trajectories(exp, 2, [3.5], seed=0)


def test_uniform_times():
    t = uniform_times(10.0, MONTH / 2)
    assert t.size == 241 and t[-1] == 10.0
    assert np.allclose(np.diff(t), 10.0 / 240)


def test_trajectory_csv_roundtrip(tmp_path):
    b = TrajectoryBatch(np.array([0.0, 0.5]), np.array([[1.0, 2.0 / 3.0], [np.pi, -1e-300]]))
    b.to_csv(tmp_path / "t.csv")
    back = TrajectoryBatch.from_csv(tmp_path / "t.csv")
    assert back.values.tobytes() == b.values.tobytes()


def test_pulse_zero_cov_is_constant():
    spec = PulseProcessSpec(MarginalDistribution("lognormal", 1.0, 0.0), 1.0, 10.0)
    b = sample_pulse_trajectories(spec, 3, np.linspace(0, 10, 21), seed=0)
    np.testing.assert_allclose(b.values, 1.0)


def test_pulse_segment_means():
    spec = PulseProcessSpec(MarginalDistribution("lognormal", 1.0, 0.3), 1.0, 10.0)
    seg = sample_pulse_segments(spec, 100_000, seed=1)
    assert seg.shape == (100_000, 10, 1)
    assert np.all(np.abs(seg.mean(axis=0) - 1.0) < 0.01)


def test_pulse_copula_rank_correlation():
    corr = np.full((3, 3), 0.8) + 0.2 * np.eye(3)
    spec = PulseProcessSpec(MarginalDistribution("lognormal", 10e-6, 0.3), 1.0, 5.0, corr)
    seg = sample_pulse_segments(spec, 40_000, seed=2)[:, 0, :]
    rho = spearmanr(seg).correlation
    # Gaussian-copula Spearman for rho=0.8 is (6/pi) asin(0.4) = 0.786
    target = 6 / np.pi * np.arcsin(0.4)
    assert np.all(np.abs(rho[np.triu_indices(3, 1)] - target) < 0.01)
    assert abs(target - 0.8) < 0.015


def test_depth_models():
    t = np.array([0.0, 2.5, 10.0])
    d = degradation_depth(Deterministic(1e-3), t, 2)
    np.testing.assert_allclose(d.values[:, -1], 10e-3)
    rv = degradation_depth(RandomVariable(MarginalDistribution("lognormal", 1e-3, 0.0)), t, 2, seed=0)
    np.testing.assert_allclose(rv.values, d.values)


def test_pulse_depth_partial_segment():
    spec = PulseProcessSpec(MarginalDistribution("lognormal", 1.0, 0.3), 1.0, 10.0)
    seg = sample_pulse_segments(spec, 50_000, seed=4)[:, :, 0]
    d = degradation_depth(PulseProcess(spec), [2.5], 50_000, seed=4).values[:, 0]
    np.testing.assert_allclose(d, seg[:, 0] + seg[:, 1] + 0.5 * seg[:, 2], rtol=1e-12)
    se = d.std() / np.sqrt(d.size)
    assert abs(d.mean() - 2.5) < 3 * se
