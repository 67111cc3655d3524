"""Life-cycle cost: initial cost plus discounted expected failure cost."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .reliability import PfcCurve

INCREMENTAL = "incremental"
CUMULATIVE = "cumulative"


class PeriodMismatch(ValueError):
    pass


@dataclass(frozen=True)
class CostSpec:
    """Cost model.

    ``failure_cost_multipliers`` holds one entry per failure event; the cost
    of failure is ``multiplier * C_I(d)``.
    """

    initial_cost_fn: Callable[[np.ndarray], float]
    failure_cost_multipliers: Sequence[float]
    discount_rate: float
    periods: int
    period_probability_mode: str = INCREMENTAL

    def __post_init__(self):
        if self.discount_rate < 0:
            raise ValueError("discount rate must be nonnegative")
        if self.periods < 1:
            raise ValueError("at least one period is required")
        if any(m < 0 for m in self.failure_cost_multipliers):
            raise ValueError("failure cost multipliers must be nonnegative")
        if self.period_probability_mode not in (INCREMENTAL, CUMULATIVE):
            raise ValueError(f"unknown mode {self.period_probability_mode!r}")


def period_probabilities(curve: PfcCurve, periods: int, mode: str = INCREMENTAL) -> np.ndarray:
    if curve.pfc.size != periods + 1:
        raise PeriodMismatch(f"curve has {curve.pfc.size - 1} periods, cost model expects {periods}")
    if mode == INCREMENTAL:
        return curve.increments
    return curve.pfc[1:]


def expected_failure_cost_pv(pfc_curves: Sequence[PfcCurve], spec: CostSpec, c_i: float,
                             failure_costs: Sequence[float] | None = None) -> float:
    """Present value ``sum_j sum_n P_jn * C_fj / (1 + eta)**n``.

    ``failure_costs`` overrides ``multiplier * c_i`` with absolute amounts.
    """
    if len(pfc_curves) != len(spec.failure_cost_multipliers):
        raise PeriodMismatch("one failure cost per pfc curve is required")
    if failure_costs is None:
        failure_costs = [m * c_i for m in spec.failure_cost_multipliers]
    n = np.arange(1, spec.periods + 1)
    disc = (1.0 + spec.discount_rate) ** -n
    total = 0.0
    for curve, cf in zip(pfc_curves, failure_costs):
        p = period_probabilities(curve, spec.periods, spec.period_probability_mode)
        total += float(np.sum(p * disc)) * cf
    return total


@dataclass
class CostBreakdown:
    total: float
    initial: float
    expected_failure: float
    pfc_curves: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "total_cost": self.total,
            "initial_cost": self.initial,
            "expected_failure_cost_pv": self.expected_failure,
            "pfc_curves": [c.to_dict() for c in self.pfc_curves],
        }


def total_cost(d, problem, backend) -> tuple[float, CostBreakdown]:
    """``C_T(d) = C_I(d) + C_EF^PV(d)`` using ``backend.pfc_curves(d)``."""
    d = np.asarray(d, dtype=float)
    spec = problem.cost_spec
    c_i = float(spec.initial_cost_fn(d))
    curves = backend.pfc_curves(d)
    c_ef = expected_failure_cost_pv(curves, spec, c_i)
    total = c_i + c_ef
    return total, CostBreakdown(total, c_i, c_ef, curves)
