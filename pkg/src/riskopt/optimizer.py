"""Outer-loop optimizers: EGO with expected improvement, and a particle swarm reference."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import iqr

from .acquisition import CandidateSet, expected_improvement
from .kriging import DuplicatePoint, ExperimentalDesign, add_point, fit, is_duplicate, predict
from .numerics import Bounds, lhs_sample

logger = logging.getLogger(__name__)

DUPLICATE_TOL = 1e-9


@dataclass
class EgoConfig:
    n_candidates: int = 100_000
    initial_doe_size: int | None = None
    ei_threshold: float = 1e-3
    max_cost_calls: int = 100
    seed: int = 0
    corr_family: str = "matern52"
    n_starts: int = 5
    refit_starts: int = 2

    def __post_init__(self):
        if self.n_candidates < 1 or self.max_cost_calls < 1:
            raise ValueError("EGO counts must be >= 1")
        if self.initial_doe_size is not None and self.initial_doe_size < 2:
            raise ValueError("the initial design needs at least two points")
        if not self.ei_threshold > 0:
            raise ValueError("EI threshold must be positive")

    def doe_size(self, dim: int) -> int:
        return self.initial_doe_size or max(10, 3 * dim)


@dataclass
class EgoResult:
    d_star: np.ndarray
    c_star: float
    n_cost_calls: int
    doe_history: list
    converged: bool
    trace: list = field(default_factory=list)
    surrogate: object = None

    def to_dict(self) -> dict:
        return {
            "d_star": [float(v) for v in self.d_star],
            "c_star": float(self.c_star),
            "n_cost_calls": self.n_cost_calls,
            "converged": self.converged,
            "doe_history": [{"d": [float(v) for v in d], "cost": float(c)} for d, c in self.doe_history],
            "trace": self.trace,
        }


def _cost_scale(costs) -> float:
    return float(iqr(costs))


def ego_optimize(cost_fn: Callable[[np.ndarray], float], box: Bounds,
                 config: EgoConfig | None = None) -> EgoResult:
    """Minimize ``cost_fn`` over ``box`` by efficient global optimization.

    An initial Latin hypercube design is evaluated, then each iteration fits
    Kriging to the observed costs, scores a fresh candidate sample by expected
    improvement over the best observed cost and evaluates the winner. The run
    stops when the best EI falls below ``ei_threshold`` times the interquartile
    range of the observed costs. The returned design is the best one observed.
    """
    cfg = config or EgoConfig()
    rng = np.random.default_rng(cfg.seed)
    m = cfg.doe_size(box.dim)
    if cfg.max_cost_calls < m:
        raise ValueError("cost-call budget smaller than the initial design")
    pts = lhs_sample(m, box, rng)
    costs = [float(cost_fn(p)) for p in pts]
    history = [(p.copy(), c) for p, c in zip(pts, costs)]
    trace = [{"iteration": 0, "design": [float(v) for v in p], "cost": c, "max_ei": None}
             for p, c in history]
    model = fit(ExperimentalDesign(pts, np.array(costs)), cfg.corr_family,
                n_starts=cfg.n_starts, seed=int(rng.integers(2**31)))
    converged = False
    it = 0
    while True:
        it += 1
        y_min = min(costs)
        if model.degenerate:
            # all observed costs equal: no improvement can be expected
            converged = True
            break
        cand = CandidateSet(lhs_sample(cfg.n_candidates, box, rng))
        pred = predict(model, cand.points)
        ei = np.atleast_1d(expected_improvement(pred.mean, pred.variance, y_min))
        best_ei = float(ei.max())
        if best_ei <= cfg.ei_threshold * _cost_scale(costs):
            converged = True
            break
        if len(costs) >= cfg.max_cost_calls:
            logger.warning("EGO budget of %d cost calls exhausted", cfg.max_cost_calls)
            break
        order = np.argsort(-ei, kind="stable")
        idx = next((i for i in order if not is_duplicate(model.design.points, cand.points[i],
                                                         DUPLICATE_TOL)), None)
        if idx is None:
            converged = True
            break
        x_new = cand.points[idx]
        c_new = float(cost_fn(x_new))
        costs.append(c_new)
        history.append((x_new.copy(), c_new))
        trace.append({"iteration": it, "design": [float(v) for v in x_new], "cost": c_new,
                      "max_ei": best_ei})
        logger.debug("EGO iter %d: max EI %.4g, cost %.6g", it, best_ei, c_new)
        try:
            model = add_point(model, x_new, c_new, n_starts=cfg.refit_starts,
                              seed=int(rng.integers(2**31)))
        except DuplicatePoint:
            continue
    k = int(np.argmin(costs))
    return EgoResult(history[k][0], costs[k], len(costs), history, converged, trace, model)


@dataclass
class PsoConfig:
    n_particles: int = 30
    inertia: float = 0.72
    cognitive: float = 1.49
    social: float = 1.49
    tolerance: float | None = 1e-4
    max_generations: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("at least one particle is required")
        if min(self.inertia, self.cognitive, self.social) <= 0:
            raise ValueError("PSO coefficients must be positive")
        if self.tolerance is None and self.max_generations is None:
            raise ValueError("PSO needs a tolerance or a generation limit")


@dataclass
class PsoResult:
    d_star: np.ndarray
    c_star: float
    n_cost_calls: int
    n_generations: int
    trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"d_star": [float(v) for v in self.d_star], "c_star": float(self.c_star),
                "n_cost_calls": self.n_cost_calls, "n_generations": self.n_generations,
                "trace": self.trace}


PSO_GENERATION_CAP = 10_000


def pso_optimize(cost_fn: Callable[[np.ndarray], float], box: Bounds,
                 config: PsoConfig | None = None) -> PsoResult:
    """Global-best particle swarm with positions clamped to ``box``.

    The tolerance stop fires when no particle moved by more than
    ``tolerance`` (relative to the box width) in any coordinate during a
    generation.
    """
    cfg = config or PsoConfig()
    rng = np.random.default_rng(cfg.seed)
    n, dim = cfg.n_particles, box.dim
    width = box.width
    x = lhs_sample(n, box, rng)
    v = np.zeros_like(x)
    f = np.array([float(cost_fn(p)) for p in x])
    calls = n
    p_best, p_val = x.copy(), f.copy()
    g = int(np.argmin(p_val))
    trace = [{"generation": 0, "design": [float(c) for c in p_best[g]], "cost": float(p_val[g])}]
    limit = cfg.max_generations if cfg.max_generations is not None else PSO_GENERATION_CAP
    gen = 0
    while gen < limit:
        gen += 1
        r1 = rng.random((n, dim))
        r2 = rng.random((n, dim))
        v = cfg.inertia * v + cfg.cognitive * r1 * (p_best - x) + cfg.social * r2 * (p_best[g] - x)
        x_new = box.clip(x + v)
        v = x_new - x
        moved = float(np.max(np.abs(v) / width))
        x = x_new
        f = np.array([float(cost_fn(p)) for p in x])
        calls += n
        better = f < p_val
        p_best[better], p_val[better] = x[better], f[better]
        g = int(np.argmin(p_val))
        trace.append({"generation": gen, "design": [float(c) for c in p_best[g]],
                      "cost": float(p_val[g])})
        if cfg.tolerance is not None and moved < cfg.tolerance:
            break
    return PsoResult(p_best[g].copy(), float(p_val[g]), calls, gen, trace)


def write_trace_csv(result, path) -> None:
    """Optimization trace as CSV: iteration, design coordinates, cost, max EI."""
    rows = result.trace
    dim = len(rows[0]["design"]) if rows else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration"] + [f"d{i + 1}" for i in range(dim)] + ["cost", "max_ei"])
        for r in rows:
            it = r.get("iteration", r.get("generation"))
            ei = r.get("max_ei")
            w.writerow([it] + [repr(c) for c in r["design"]] + [repr(r["cost"]),
                                                                "" if ei is None else repr(ei)])


__all__ = ["EgoConfig", "EgoResult", "PsoConfig", "PsoResult", "ego_optimize", "pso_optimize",
           "write_trace_csv"]
