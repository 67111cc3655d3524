from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from ..cost import CostSpec
from ..numerics import Bounds
from ..process import uniform_times
from ..reliability import LimitStateEvaluator, system_limit_state

EGRA_SURROGATE = "egra"
DIRECT = "direct"


class UnknownProblem(KeyError):
    pass


class UnknownParameter(KeyError):
    pass


def merge_params(defaults: dict, overrides: dict | None) -> dict:
    """Recursively overlay ``overrides`` on ``defaults``, rejecting unknown keys."""
    out = copy.deepcopy(defaults)
    for key, value in (overrides or {}).items():
        if key not in out:
            raise UnknownParameter(f"unknown problem parameter {key!r}")
        if isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = merge_params(out[key], value)
        else:
            out[key] = value
    return out


def spawn_seeds(seed, n: int) -> list[np.random.Generator]:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(n)]


@dataclass
class Randomness:
    """Design-independent random draws shared by all designs of one run."""

    arrays: dict
    n_traj: int
    seed: object

    def __getitem__(self, key):
        return self.arrays[key]


class RiskProblem:
    """A risk optimization problem: design box, stochastic model, limit states and costs.

    Subclasses implement ``sample_randomness``, ``instantaneous_inputs``,
    ``input_bounds`` and ``initial_cost``.
    """

    name: str
    design_names: tuple
    input_names: tuple
    static_inputs: np.ndarray
    limit_states: list
    system: bool = False
    surrogate_policy: str = EGRA_SURROGATE
    surrogate_group: str | None = None

    def __init__(self, name: str, params: dict):
        self.name = name
        self.params = params
        box = params["design_box"]
        self.design_box = Bounds(np.array(box["lower"], float), np.array(box["upper"], float))
        self.horizon = float(params["horizon"])
        self.dt = float(params["dt"])
        cost = params["cost"]
        self.cost_spec = CostSpec(
            initial_cost_fn=self.initial_cost,
            failure_cost_multipliers=list(cost["failure_cost_multipliers"]),
            discount_rate=float(cost["discount_rate"]),
            periods=int(cost.get("periods", round(self.horizon))),
            period_probability_mode=cost.get("mode", "incremental"),
        )
        self.surrogate_policy = params.get("surrogate_policy", self.surrogate_policy)

    def times(self) -> np.ndarray:
        return uniform_times(self.horizon, self.dt)

    def period_boundaries(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.cost_spec.periods + 1)

    def failure_events(self) -> list[LimitStateEvaluator]:
        if self.system:
            return [system_limit_state(self.limit_states, name=f"{self.name}_system")]
        return list(self.limit_states)

    @property
    def design_dim(self) -> int:
        return self.design_box.dim

    @property
    def input_dim(self) -> int:
        return len(self.input_names)

    def sample_randomness(self, n_traj: int, seed) -> Randomness:
        raise NotImplementedError

    def instantaneous_inputs(self, d, rnd: Randomness, start: int = 0, stop: int | None = None):
        raise NotImplementedError

    def input_bounds(self, q_lo: float, q_hi: float):
        raise NotImplementedError

    def initial_cost(self, d) -> float:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"name": self.name, "design_names": list(self.design_names),
                "input_names": list(self.input_names), "params": self.params}
