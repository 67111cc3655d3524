import csv

import numpy as np
import pytest

from riskopt.numerics import Bounds
from riskopt.optimizer import EgoConfig, PsoConfig, ego_optimize, pso_optimize, write_trace_csv

UNIT = Bounds([0.0], [1.0])


def quadratic(x):
    return float((x[0] - 0.3) ** 2)


class Counter:
    def __init__(self, fn):
        self.fn, self.calls = fn, 0

    def __call__(self, x):
        self.calls += 1
        return self.fn(x)


def branin(x):
    x1, x2 = x
    b, c, t = 5.1 / (4 * np.pi**2), 5 / np.pi, 1 / (8 * np.pi)
    return float((x2 - b * x1**2 + c * x1 - 6) ** 2 + 10 * (1 - t) * np.cos(x1) + 10)


BRANIN_BOX = Bounds([-5.0, 0.0], [10.0, 15.0])


def test_ego_quadratic():
    fn = Counter(quadratic)
    res = ego_optimize(fn, UNIT, EgoConfig(initial_doe_size=5, n_candidates=20_000, seed=0))
    assert abs(res.d_star[0] - 0.3) < 0.02
    assert res.n_cost_calls <= 15
    assert fn.calls == res.n_cost_calls == len(res.doe_history)


def test_ego_invariants():
    res = ego_optimize(quadratic, UNIT, EgoConfig(initial_doe_size=5, n_candidates=20_000, seed=3))
    recorded = dict((tuple(d), c) for d, c in res.doe_history)
    assert recorded[tuple(res.d_star)] == res.c_star == quadratic(res.d_star)
    best = np.minimum.accumulate([c for _, c in res.doe_history])
    assert np.all(np.diff(best) <= 0)
    assert all(UNIT.contains(np.atleast_2d(d)).all() for d, _ in res.doe_history)


def test_ego_constant_cost_stops_after_doe():
    fn = Counter(lambda x: 4.0)
    res = ego_optimize(fn, UNIT, EgoConfig(n_candidates=1000, seed=0))
    assert res.converged and fn.calls == 10


def test_ego_branin_against_grid():
    g1, g2 = np.meshgrid(np.linspace(-5, 10, 200), np.linspace(0, 15, 200))
    grid_min = min(branin(p) for p in np.column_stack([g1.ravel(), g2.ravel()]))
    # the default stop (1e-3 of the cost IQR) is coarser than 1% of this minimum
    res = ego_optimize(branin, BRANIN_BOX, EgoConfig(ei_threshold=1e-5, seed=1))
    assert res.c_star <= grid_min * 1.01
    assert grid_min == pytest.approx(0.397887, abs=2e-3)


def test_ego_budget_exhaustion():
    res = ego_optimize(branin, BRANIN_BOX, EgoConfig(n_candidates=2000, max_cost_calls=11, seed=0))
    assert not res.converged and res.n_cost_calls == 11
    with pytest.raises(ValueError):
        ego_optimize(branin, BRANIN_BOX, EgoConfig(max_cost_calls=5))


def test_ego_deterministic():
    a = ego_optimize(branin, BRANIN_BOX, EgoConfig(n_candidates=5000, max_cost_calls=14, seed=2))
    b = ego_optimize(branin, BRANIN_BOX, EgoConfig(n_candidates=5000, max_cost_calls=14, seed=2))
    assert a.to_dict() == b.to_dict()


def test_config_validation():
    with pytest.raises(ValueError):
        EgoConfig(ei_threshold=0.0)
    with pytest.raises(ValueError):
        EgoConfig(initial_doe_size=1)
    with pytest.raises(ValueError):
        PsoConfig(inertia=0.0)
    with pytest.raises(ValueError):
        PsoConfig(tolerance=None)
    assert EgoConfig().doe_size(2) == 10 and EgoConfig().doe_size(5) == 15


def test_pso_quadratic_tolerance_stop():
    res = pso_optimize(quadratic, UNIT, PsoConfig(seed=0))
    assert abs(res.d_star[0] - 0.3) < 1e-3
    assert res.n_cost_calls == 30 * (res.n_generations + 1)


def test_pso_zero_generations_is_initial_best():
    fn = Counter(quadratic)
    res = pso_optimize(fn, UNIT, PsoConfig(max_generations=0, tolerance=None, seed=4))
    assert fn.calls == 30 and res.n_generations == 0
    assert res.c_star == res.trace[0]["cost"]


def test_pso_respects_box_and_determinism():
    seen = []
    res = pso_optimize(lambda x: seen.append(x.copy()) or branin(x), BRANIN_BOX,
                       PsoConfig(max_generations=20, seed=1))
    assert BRANIN_BOX.contains(np.array(seen)).all()
    again = pso_optimize(branin, BRANIN_BOX, PsoConfig(max_generations=20, seed=1))
    assert res.to_dict() == again.to_dict()


def test_trace_csv(tmp_path):
    res = ego_optimize(quadratic, UNIT, EgoConfig(initial_doe_size=5, n_candidates=2000, seed=0))
    write_trace_csv(res, tmp_path / "trace.csv")
    rows = list(csv.reader(open(tmp_path / "trace.csv")))
    assert rows[0] == ["iteration", "d1", "cost", "max_ei"]
    assert len(rows) == res.n_cost_calls + 1
