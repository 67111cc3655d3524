"""Stochastic inputs: EOLE-discretized Gaussian processes, pulse processes and
corrosion-depth trajectories."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .numerics import MarginalDistribution, cholesky, sym_eig


class NoPositiveEigenvalues(np.linalg.LinAlgError):
    pass


class TimeOutOfRange(ValueError):
    pass


def gaussian_autocorrelation(lag, corr_length: float):
    """``exp(-(lag / corr_length)**2)``."""
    return np.exp(-np.square(np.asarray(lag, dtype=float) / corr_length))


def _as_fn(value) -> Callable:
    if callable(value):
        return value
    const = float(value)
    return lambda t: np.full(np.shape(t), const, dtype=float)


@dataclass(frozen=True)
class GaussianProcessSpec:
    """Gaussian process with Gaussian autocorrelation on ``[0, horizon]``.

    ``mean`` and ``std`` are constants or callables of time.
    """

    mean: Union[float, Callable]
    std: Union[float, Callable]
    corr_length: float
    horizon: float

    def __post_init__(self):
        if not self.corr_length > 0:
            raise ValueError("correlation length must be positive")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")

    def mean_fn(self, t):
        return _as_fn(self.mean)(np.asarray(t, dtype=float))

    def std_fn(self, t):
        return _as_fn(self.std)(np.asarray(t, dtype=float))

    def correlation(self, t1, t2):
        return gaussian_autocorrelation(np.subtract.outer(np.asarray(t1, float), np.asarray(t2, float)),
                                        self.corr_length)


def default_node_count(spec: GaussianProcessSpec) -> int:
    return int(math.ceil(2.0 * spec.horizon / spec.corr_length - 1e-9)) + 1


@dataclass(frozen=True)
class EoleExpansion:
    spec: GaussianProcessSpec
    nodes: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    corr_matrix_nodes: np.ndarray = field(repr=False)
    eps: float = 1e-3

    @property
    def order(self) -> int:
        return self.eigvals.size

    @property
    def retained_fraction(self) -> float:
        return float(np.sum(self.eigvals) / np.trace(self.corr_matrix_nodes))

    def basis(self, times) -> np.ndarray:
        """Matrix ``B`` with ``X(t) = m(t) + s(t) * (B @ xi)``; shape (len(times), order)."""
        c = self.spec.correlation(times, self.nodes)
        return (c @ self.eigvecs) / np.sqrt(self.eigvals)

    def variance_ratio(self, times) -> np.ndarray:
        """Variance of the truncated expansion relative to ``std(t)**2``."""
        return np.sum(np.square(self.basis(times)), axis=1)


def build_eole(spec: GaussianProcessSpec, node_count: int | None = None,
               eps: float = 1e-3) -> EoleExpansion:
    """Build a truncated EOLE expansion on ``node_count`` equally spaced nodes.

    The order is the smallest ``r`` whose leading eigenvalues hold at least
    ``(1 - eps)`` of the trace of the nodal correlation matrix.
    """
    p = default_node_count(spec) if node_count is None else int(node_count)
    if p < 2:
        raise ValueError("EOLE needs at least two nodes")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    nodes = np.linspace(0.0, spec.horizon, p)
    C = spec.correlation(nodes, nodes)
    w, v = sym_eig(C)
    trace = float(np.trace(C))
    positive = w > 1e-12 * w[0] if w[0] > 0 else np.zeros_like(w, dtype=bool)
    if not np.any(positive):
        raise NoPositiveEigenvalues("nodal correlation matrix has no positive eigenvalue")
    cum = np.cumsum(w)
    hit = np.nonzero(cum >= (1.0 - eps) * trace)[0]
    r = int(hit[0]) + 1 if hit.size else int(np.sum(positive))
    r = min(r, int(np.sum(positive)))
    exp = EoleExpansion(spec, nodes, w[:r].copy(), v[:, :r].copy(), C, eps)
    if exp.retained_fraction < 1.0 - eps - 1e-12:
        raise NoPositiveEigenvalues("truncation bound cannot be met")
    return exp


@dataclass(frozen=True)
class TrajectoryBatch:
    times: np.ndarray
    values: np.ndarray
    seed: object = None

    @property
    def n_traj(self) -> int:
        return self.values.shape[0]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([repr(float(t)) for t in self.times])
            for row in self.values:
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "TrajectoryBatch":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        return cls(np.array(rows[0], float), np.array(rows[1:], float))


def uniform_times(horizon: float, dt: float) -> np.ndarray:
    """Grid ``t_i = i * dt`` with ``dt`` adjusted so that the last point is ``horizon``."""
    n = int(round(horizon / dt)) + 1
    return np.linspace(0.0, horizon, max(n, 2))


def _check_times(times, horizon):
    times = np.asarray(times, dtype=float)
    if np.any(times < -1e-12) or np.any(times > horizon * (1 + 1e-12) + 1e-12):
        raise TimeOutOfRange(f"times must lie in [0, {horizon}]")
    return times


def sample_gp_trajectories(exp: EoleExpansion, n_traj: int, times, seed=None, *,
                           xi: np.ndarray | None = None) -> TrajectoryBatch:
    """Sample ``n_traj`` trajectories of the expanded process at ``times``.

    ``xi`` (shape (n_traj, order)) overrides the standard normal weights.
    """
    times = _check_times(times, exp.spec.horizon)
    if xi is None:
        xi = np.random.default_rng(seed).standard_normal((n_traj, exp.order))
    xi = np.asarray(xi, dtype=float)
    B = exp.basis(times)
    values = exp.spec.mean_fn(times) + exp.spec.std_fn(times) * (xi @ B.T)
    return TrajectoryBatch(times, values, seed)


@dataclass(frozen=True)
class PulseProcessSpec:
    marginal: MarginalDistribution
    renewal_period: float
    horizon: float
    cross_correlation: np.ndarray | None = None

    @property
    def n_segments(self) -> int:
        return int(math.ceil(self.horizon / self.renewal_period - 1e-9))

    @property
    def n_processes(self) -> int:
        return 1 if self.cross_correlation is None else np.asarray(self.cross_correlation).shape[0]


def segment_index(times, period: float, n_segments: int) -> np.ndarray:
    idx = np.floor(np.asarray(times, float) / period + 1e-9).astype(int)
    return np.minimum(idx, n_segments - 1)


def sample_pulse_segments(spec: PulseProcessSpec, n_traj: int, seed=None) -> np.ndarray:
    """Segment intensities, shape (n_traj, n_segments, n_processes).

    Companion processes are coupled within a segment by a Gaussian copula.
    """
    rng = np.random.default_rng(seed)
    q = spec.n_processes
    z = rng.standard_normal((n_traj, spec.n_segments, q))
    if spec.cross_correlation is not None:
        chol = cholesky(np.asarray(spec.cross_correlation, float), jitter=False)
        z = z @ chol.T
    return spec.marginal.transform(z)


def sample_pulse_trajectories(spec: PulseProcessSpec, n_traj: int, times, seed=None):
    """Piecewise-constant trajectories; a list with one batch per companion process."""
    times = _check_times(times, spec.horizon)
    seg = sample_pulse_segments(spec, n_traj, seed)
    idx = segment_index(times, spec.renewal_period, spec.n_segments)
    batches = [TrajectoryBatch(times, seg[:, idx, k], seed) for k in range(seg.shape[2])]
    return batches[0] if len(batches) == 1 else batches


def cumulative_pulse_depth(segments: np.ndarray, times, period: float) -> np.ndarray:
    """Integral of a piecewise-constant rate; ``segments`` has shape (n_traj, n_segments)."""
    times = np.asarray(times, float)
    n_seg = segments.shape[1]
    full = np.concatenate([np.zeros((segments.shape[0], 1)),
                           np.cumsum(segments * period, axis=1)], axis=1)
    idx = segment_index(times, period, n_seg)
    frac = times - idx * period
    return full[:, idx] + segments[:, idx] * frac


@dataclass(frozen=True)
class Deterministic:
    rate: float


@dataclass(frozen=True)
class RandomVariable:
    dist: MarginalDistribution


@dataclass(frozen=True)
class PulseProcess:
    spec: PulseProcessSpec


def degradation_depth(kappa_model, times, n_traj: int, seed=None) -> TrajectoryBatch:
    """Cumulative corrosion depth ``d_c(t)`` for the given rate model."""
    times = np.asarray(times, dtype=float)
    if isinstance(kappa_model, Deterministic):
        values = np.broadcast_to(kappa_model.rate * times, (n_traj, times.size)).copy()
    elif isinstance(kappa_model, RandomVariable):
        kappa = kappa_model.dist.sample(n_traj, seed)
        values = kappa[:, None] * times[None, :]
    elif isinstance(kappa_model, PulseProcess):
        spec = kappa_model.spec
        _check_times(times, spec.horizon)
        seg = sample_pulse_segments(spec, n_traj, seed)[:, :, 0]
        values = cumulative_pulse_depth(seg, times, spec.renewal_period)
    else:
        raise TypeError(f"unsupported corrosion model {kappa_model!r}")
    return TrajectoryBatch(times, values, seed)
