"""Cumulative failure probability by trajectory counting, with an optional
EGRA-built Kriging surrogate of the quasi-static limit state."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .acquisition import CandidateSet, expected_feasibility
from .kriging import (DuplicatePoint, ExperimentalDesign, KrigingModel, add_point, fit,
                      is_duplicate, predict)
from .numerics import Bounds, lhs_sample

logger = logging.getLogger(__name__)


class GridMismatch(ValueError):
    pass


class ExcessiveExtrapolation(RuntimeError):
    pass


class BudgetExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class LimitStateEvaluator:
    """Vectorized limit state: ``evaluate`` maps inputs of shape (..., input_dim) to g (...).

    Failure is ``g <= 0``.
    """

    name: str
    input_dim: int
    evaluate: Callable[[np.ndarray], np.ndarray]
    description: str = ""

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.input_dim:
            raise ValueError(f"{self.name}: expected {self.input_dim} inputs, got {x.shape[-1]}")
        return self.evaluate(x)


def system_limit_state(components: Sequence[LimitStateEvaluator], name="system") -> LimitStateEvaluator:
    """Series system: ``g_sys = min(g_1, ..., g_m)`` over shared inputs."""
    dim = components[0].input_dim

    def evaluate(x):
        return np.min(np.stack([c(x) for c in components]), axis=0)

    return LimitStateEvaluator(name, dim, evaluate, "min of " + ", ".join(c.name for c in components))


@dataclass(frozen=True)
class PfcCurve:
    boundaries: np.ndarray
    pfc: np.ndarray
    n_mc: int
    includes_k0: bool = True
    clamp_fraction: float = 0.0

    @property
    def std_error(self) -> np.ndarray:
        p = self.pfc
        return np.sqrt(p * (1 - p) / self.n_mc)

    @property
    def increments(self) -> np.ndarray:
        """Probability of first failure within each period (failures at t=0 go to the first)."""
        return np.diff(np.concatenate([[0.0], self.pfc[1:]]))

    def to_dict(self) -> dict:
        return {"boundaries": self.boundaries.tolist(), "pfc": self.pfc.tolist(),
                "std_error": self.std_error.tolist(), "n_mc": self.n_mc,
                "clamp_fraction": self.clamp_fraction}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["period", "pfc", "std_error"])
            for b, p, s in zip(self.boundaries, self.pfc, self.std_error):
                w.writerow([repr(float(b)), repr(float(p)), repr(float(s))])


def first_failure_index(g: np.ndarray) -> np.ndarray:
    """Index of the first ``g <= 0`` along the last axis, -1 when none."""
    fail = np.asarray(g) <= 0
    idx = np.argmax(fail, axis=-1)
    return np.where(fail.any(axis=-1), idx, -1)


def boundary_indices(times, period_boundaries) -> np.ndarray:
    times = np.asarray(times, float)
    b = np.asarray(period_boundaries, float)
    tol = 1e-9 * max(1.0, float(times[-1]))
    if b.min() < times[0] - tol or b.max() > times[-1] + tol:
        raise GridMismatch("period boundaries fall outside the time grid")
    return np.searchsorted(times, b + tol, side="right") - 1


def pfc_from_first_failure(first: np.ndarray, times, period_boundaries, **kw) -> PfcCurve:
    """Counter estimator: ``pfc(0, t_i) = (k_i + k_0) / N_MC``.

    A trajectory whose first failure lies at grid index ``i`` increments every
    counter from ``i`` on; index 0 feeds ``k_0``.
    """
    first = np.asarray(first)
    n = first.size
    n_t = len(times)
    counts = np.bincount(first[first >= 0], minlength=n_t)
    k = np.cumsum(counts)  # k[i] = k_0 + failures first seen in (t_0, t_i]
    idx = boundary_indices(times, period_boundaries)
    return PfcCurve(np.asarray(period_boundaries, float), k[idx] / n, n, True, **kw)


def assemble_inputs(static_samples: np.ndarray | None, processes: Sequence[np.ndarray]) -> np.ndarray:
    """Stack per-trajectory random variables and process trajectories.

    ``static_samples`` has shape (n_traj, p) and is repeated along time; each
    process array has shape (n_traj, n_times). Returns (n_traj, n_times, p + q).
    """
    procs = [np.asarray(p, float) for p in processes]
    n_traj, n_t = procs[0].shape
    cols = []
    if static_samples is not None:
        s = np.atleast_2d(np.asarray(static_samples, float))
        cols.append(np.broadcast_to(s[:, None, :], (n_traj, n_t, s.shape[1])))
    cols.extend(p[:, :, None] for p in procs)
    return np.concatenate(cols, axis=2)


def _chunks(inputs):
    if isinstance(inputs, np.ndarray):
        return [inputs]
    return inputs


def estimate_pfc(evaluator: LimitStateEvaluator, inputs, times, period_boundaries) -> PfcCurve:
    """Brute-force cumulative failure probability on the true limit state.

    ``inputs`` is an array of shape (n_traj, n_times, k) or an iterable of
    such chunks split along trajectories.
    """
    firsts = []
    for chunk in _chunks(inputs):
        if chunk.shape[1] != len(times):
            raise GridMismatch("input trajectories and time grid differ in length")
        firsts.append(first_failure_index(evaluator(chunk)))
    return pfc_from_first_failure(np.concatenate(firsts), times, period_boundaries)


def estimate_instantaneous_pf(evaluator: LimitStateEvaluator, input_sampler, t: float,
                              n_mc: int, seed=None) -> float:
    """Fraction of ``n_mc`` samples at time ``t`` with ``g <= 0``.

    ``input_sampler(t, n_mc, seed)`` returns an (n_mc, k) array.
    """
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    x = input_sampler(t, n_mc, seed)
    return float(np.mean(evaluator(x) <= 0))


@dataclass(frozen=True)
class AugmentedSpace:
    bounds: Bounds
    construction_quantiles: tuple = (1e-5, 1 - 1e-5)
    input_names: tuple = ()

    def union(self, other: "AugmentedSpace") -> "AugmentedSpace":
        return AugmentedSpace(self.bounds.union(other.bounds), self.construction_quantiles,
                              self.input_names)

    def to_dict(self) -> dict:
        return {"bounds": self.bounds.to_dict(), "quantiles": list(self.construction_quantiles),
                "input_names": list(self.input_names)}

    @classmethod
    def from_dict(cls, data) -> "AugmentedSpace":
        b = data["bounds"]
        return cls(Bounds(np.array(b["lower"]), np.array(b["upper"])),
                   tuple(data["quantiles"]), tuple(data.get("input_names", ())))


def widen_degenerate(lo, hi, rel: float = 1e-6):
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    flat = hi - lo <= 1e-12 * np.maximum(np.abs(lo), 1.0)
    pad = np.where(np.abs(lo) > 0, rel * np.abs(lo), rel)
    lo[flat] -= pad[flat]
    hi[flat] += pad[flat]
    return lo, hi


def make_augmented_space(problem, q_lo: float = 1e-5, q_hi: float = 1 - 1e-5) -> AugmentedSpace:
    """Box over the instantaneous limit-state inputs.

    Each bound is the extreme ``q_lo`` / ``q_hi`` marginal quantile over the
    design box and the time horizon, as reported by ``problem.input_bounds``.
    """
    lo, hi = problem.input_bounds(q_lo, q_hi)
    lo, hi = widen_degenerate(lo, hi)
    return AugmentedSpace(Bounds(lo, hi), (q_lo, q_hi), tuple(problem.input_names))


@dataclass
class EgraConfig:
    n_initial: int | None = None
    n_candidates: int = 100_000
    eff_threshold: float = 1e-3
    max_enrichments: int = 200
    band_factor: float = 2.0
    contour: float = 0.0
    corr_family: str = "matern52"
    seed: int = 0
    n_starts: int = 5
    refit_starts: int = 2


@dataclass
class EgraReport:
    surrogate: KrigingModel
    space: AugmentedSpace
    n_limit_state_calls: int
    enrichment_history: list = field(default_factory=list)
    converged: bool = False
    name: str = ""

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "name": self.name,
            "converged": self.converged,
            "n_limit_state_calls": self.n_limit_state_calls,
            "space": self.space.to_dict(),
            "surrogate": self.surrogate.to_dict(),
            "enrichment_history": [
                {"point": list(map(float, p)), "g": float(g), "max_eff": float(e)}
                for p, g, e in self.enrichment_history
            ],
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_dict(cls, data) -> "EgraReport":
        hist = [(np.array(h["point"]), h["g"], h["max_eff"]) for h in data["enrichment_history"]]
        return cls(KrigingModel.from_dict(data["surrogate"]), AugmentedSpace.from_dict(data["space"]),
                   int(data["n_limit_state_calls"]), hist, bool(data["converged"]),
                   data.get("name", ""))

    @classmethod
    def from_json(cls, path) -> "EgraReport":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _response_scale(model: KrigingModel) -> float:
    s = float(np.std(model.design.responses))
    return s if s > 0 else 1.0


def build_limit_state_surrogate(evaluator: LimitStateEvaluator, space: AugmentedSpace,
                                config: EgraConfig | None = None) -> EgraReport:
    """Adaptive Kriging of ``evaluator`` refined near its zero contour.

    Each iteration draws a fresh LHS candidate set in the augmented space and
    enriches the design at the expected-feasibility maximizer, until the
    maximum (divided by the standard deviation of the design responses) drops
    below ``eff_threshold`` or the enrichment budget is spent.
    """
    cfg = config or EgraConfig()
    bounds = space.bounds
    d = bounds.dim
    n0 = cfg.n_initial or max(12, 4 * d)
    rng = np.random.default_rng(cfg.seed)
    x0 = lhs_sample(n0, bounds, rng)
    g0 = np.asarray(evaluator(x0), dtype=float)
    model = fit(ExperimentalDesign(x0, g0), cfg.corr_family, n_starts=cfg.n_starts,
                seed=int(rng.integers(2**31)))
    calls = n0
    history = []
    converged = False
    while True:
        cands = CandidateSet(lhs_sample(cfg.n_candidates, bounds, rng), "egra_augmented_space")
        pred = predict(model, cands.points)
        eff = expected_feasibility(pred.mean, pred.variance, cfg.contour, cfg.band_factor)
        eff = np.atleast_1d(eff) / _response_scale(model)
        order = np.argsort(-eff, kind="stable")
        best = float(eff[order[0]])
        if best < cfg.eff_threshold:
            converged = True
            break
        if len(history) >= cfg.max_enrichments:
            logger.warning("EGRA budget exhausted with max EFF %.3g", best)
            break
        for idx in order:
            if not is_duplicate(model.design.points, cands.points[idx], tol=1e-9):
                break
        x_new = cands.points[idx]
        g_new = float(evaluator(x_new[None, :])[0])
        calls += 1
        try:
            model = add_point(model, x_new, g_new, n_starts=cfg.refit_starts,
                              seed=int(rng.integers(2**31)))
        except DuplicatePoint:
            continue
        history.append((x_new, g_new, best))
        logger.debug("EGRA iter %d: max EFF %.3g, g=%.4g", len(history), best, g_new)
    return EgraReport(model, space, calls, history, converged, evaluator.name)


def surrogate_first_failure(model: KrigingModel, inputs: np.ndarray, static=None,
                            bounds: Bounds | None = None, threshold: float = 0.0):
    """First index where the surrogate mean crosses ``threshold`` on each trajectory.

    Returns ``(first, n_evaluations, n_clamped)``.
    """
    x = np.ascontiguousarray(inputs, dtype=float)
    k = x.shape[2]
    if k != model.dim:
        raise ValueError(f"surrogate expects {model.dim} inputs, got {k}")
    static = np.zeros(k, dtype=np.bool_) if static is None else np.asarray(static, dtype=np.bool_)
    if bounds is None:
        lo = np.full(k, -np.inf)
        hi = np.full(k, np.inf)
    else:
        lo, hi = bounds.lower, bounds.upper
    first = np.empty(x.shape[0], dtype=np.int64)
    counts = np.zeros(2, dtype=np.int64)
    _kernels.first_failure_surrogate(
        x, static, lo, hi, np.ascontiguousarray(model.design.points),
        1.0 / (model.theta * model.input_scale), model.family_code, model.alpha,
        model.trend_beta, model.output_shift, model.output_scale, threshold, first, counts)
    return first, int(counts[0]), int(counts[1])


def estimate_pfc_surrogate(report: EgraReport | Sequence[EgraReport], inputs, times,
                           period_boundaries, static=None,
                           max_clamp_fraction: float = 0.01) -> PfcCurve:
    """Counter estimator with g replaced by the surrogate mean.

    Several reports are combined as a series system (minimum of the means).
    Inputs outside the augmented box are clamped; more than
    ``max_clamp_fraction`` of clamped evaluations raises ExcessiveExtrapolation.
    """
    reports = [report] if isinstance(report, EgraReport) else list(report)
    bounds = reports[0].space.bounds
    firsts = []
    n_eval = n_clamp = 0
    for chunk in _chunks(inputs):
        if chunk.shape[1] != len(times):
            raise GridMismatch("input trajectories and time grid differ in length")
        if len(reports) == 1:
            f, ne, nc = surrogate_first_failure(reports[0].surrogate, chunk, static, bounds)
        else:
            flat = chunk.reshape(-1, chunk.shape[2])
            out = flat < bounds.lower
            out |= flat > bounds.upper
            nc = int(np.sum(out.any(axis=1)))
            flat = bounds.clip(flat)
            g = np.min([predict(r.surrogate, flat, return_var=False).mean for r in reports], axis=0)
            f = first_failure_index(g.reshape(chunk.shape[:2]))
            ne = flat.shape[0]
        firsts.append(f)
        n_eval += ne
        n_clamp += nc
    frac = n_clamp / max(n_eval, 1)
    if frac > max_clamp_fraction:
        raise ExcessiveExtrapolation(f"{frac:.2%} of surrogate queries fell outside the augmented space")
    if n_clamp:
        logger.info("clamped %d of %d surrogate queries to the augmented space", n_clamp, n_eval)
    return pfc_from_first_failure(np.concatenate(firsts), times, period_boundaries,
                                  clamp_fraction=frac)
