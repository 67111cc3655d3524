"""Nested-surrogate pipeline: inner limit-state surrogates, MC reliability and the cost objective."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .cost import CostBreakdown, total_cost
from .problems.base import DIRECT, RiskProblem
from .reliability import (EgraConfig, EgraReport, build_limit_state_surrogate, estimate_pfc,
                          estimate_pfc_surrogate, make_augmented_space)

logger = logging.getLogger(__name__)


def shared_augmented_space(problems, q_lo=1e-5, q_hi=1 - 1e-5):
    """Union of the augmented spaces of problems sharing one limit state."""
    spaces = [make_augmented_space(p, q_lo, q_hi) for p in problems]
    space = spaces[0]
    for s in spaces[1:]:
        space = space.union(s)
    return space


def build_surrogates(problem: RiskProblem, config: EgraConfig | None = None,
                     companions=()) -> dict[str, EgraReport]:
    """EGRA surrogate for every component limit state of ``problem``.

    ``companions`` are further problems with the same limit states (for
    instance other corrosion scenarios); the augmented space then covers all
    of them so that one surrogate serves every scenario.
    """
    cfg = config or EgraConfig()
    space = shared_augmented_space([problem, *companions])
    reports = {}
    for ls in problem.limit_states:
        rep = build_limit_state_surrogate(ls, space, cfg)
        logger.info("surrogate %s: %d calls, converged=%s", ls.name, rep.n_limit_state_calls,
                    rep.converged)
        reports[ls.name] = rep
    return reports


class ReliabilityBackend:
    """Cumulative failure probabilities for a design under fixed random draws.

    The randomness is sampled once so that every design in a run sees the
    same trajectories (common random numbers).
    """

    def __init__(self, problem: RiskProblem, n_traj: int, seed, surrogates: dict | None = None,
                 chunk: int = 2000, max_clamp_fraction: float = 0.01):
        if n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        self.problem = problem
        self.n_traj = int(n_traj)
        self.seed = seed
        self.surrogates = surrogates
        self.chunk = int(chunk)
        self.max_clamp_fraction = max_clamp_fraction
        self.times = problem.times()
        self.boundaries = problem.period_boundaries()
        self._rnd = None
        if problem.surrogate_policy != DIRECT and not surrogates:
            raise ValueError(f"{problem.name} needs limit-state surrogates")

    @property
    def randomness(self):
        if self._rnd is None:
            self._rnd = self.problem.sample_randomness(self.n_traj, self.seed)
        return self._rnd

    def _input_chunks(self, d):
        rnd = self.randomness
        for start in range(0, self.n_traj, self.chunk):
            yield self.problem.instantaneous_inputs(d, rnd, start, min(start + self.chunk, self.n_traj))

    def pfc_curves(self, d):
        d = np.asarray(d, float)
        p = self.problem
        if p.surrogate_policy == DIRECT:
            return [estimate_pfc(ev, self._input_chunks(d), self.times, self.boundaries)
                    for ev in p.failure_events()]
        reports = [self.surrogates[ls.name] for ls in p.limit_states]
        if p.system:
            return [estimate_pfc_surrogate(reports, self._input_chunks(d), self.times, self.boundaries,
                                           p.static_inputs, self.max_clamp_fraction)]
        return [estimate_pfc_surrogate(r, self._input_chunks(d), self.times, self.boundaries,
                                       p.static_inputs, self.max_clamp_fraction) for r in reports]


@dataclass
class CostFunction:
    """Counting wrapper around ``total_cost`` for one problem and backend."""

    problem: RiskProblem
    backend: ReliabilityBackend
    n_calls: int = 0
    breakdowns: list = field(default_factory=list)

    def __call__(self, d) -> float:
        value, breakdown = self.evaluate(d)
        return value

    def evaluate(self, d) -> tuple[float, CostBreakdown]:
        total, breakdown = total_cost(d, self.problem, self.backend)
        self.n_calls += 1
        self.breakdowns.append(breakdown)
        return total, breakdown
