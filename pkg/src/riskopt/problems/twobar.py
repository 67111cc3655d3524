"""Symmetric two-bar truss with load-path dependent system failure."""

from __future__ import annotations

import numpy as np
from scipy.stats import norm

from ..numerics import MarginalDistribution
from ..process import GaussianProcessSpec, build_eole, sample_gp_trajectories
from ..reliability import LimitStateEvaluator
from .base import DIRECT, Randomness, RiskProblem, spawn_seeds

MONTH = 1.0 / 12.0

DEFAULTS = {
    "alpha_deg": 45.0,
    "length": 0.34,                  # m, calibrated
    "modulus": {"family": "normal", "mean": 70e9, "cov": 0.03},           # Pa
    "ultimate_stress": {"family": "normal", "mean": 24.5643e6, "cov": 0.10},  # Pa
    "horizontal_load": {"mean": 2000.0, "cov": 0.2, "corr_length": MONTH},   # N
    "vertical_load": {"mean": 1000.0, "cov": 0.2, "corr_length": MONTH},     # N
    "horizon": 10.0,
    "dt": MONTH / 2,
    "eole_eps": 1e-3,
    "design_box": {"lower": [0.004, 0.004], "upper": [0.006, 0.006]},
    "cost": {"scale": 1e5, "failure_cost_multipliers": [10.0],
             "discount_rate": 0.02, "periods": 10, "mode": "incremental"},
    "surrogate_policy": DIRECT,
}


def circle_area(r):
    return np.pi * np.square(r)


def circle_inertia(r):
    r2 = np.square(np.asarray(r, float))
    return np.pi * r2 * r2 / 4.0


def bar_forces(H, V, alpha):
    """Tension in bar 1 and compression in bar 2; a negative tension compresses bar 1."""
    h = np.asarray(H, float) / (2.0 * np.cos(alpha))
    v = np.asarray(V, float) / (2.0 * np.sin(alpha))
    return h - v, h + v


def twobar_limit_states(A1, A2, I1, I2, E, su, H, V, alpha, L):
    """Return ``(g_t1, g_b1, g_b2, g_sys)``.

    ``A2`` does not enter any mode; it is accepted to keep the section
    description complete.
    """
    del A2
    n1, n2 = bar_forces(H, V, alpha)
    euler = np.pi**2 * np.asarray(E, float) / L**2
    g_t1 = A1 * su - n1
    g_b1 = euler * I1 + n1
    g_b2 = euler * I2 - n2
    g_sys = np.minimum(np.minimum(g_t1, g_b1), g_b2)
    return g_t1, g_b1, g_b2, g_sys


def scripted_paths(h_final=2000.0, v_final=2000.0, n=201):
    """Deterministic load paths from A = (0, 0) to B = (h_final, v_final).

    Path 1 raises V first, path 2 raises H first, path 3 raises both together.
    Each entry is an ``(n, 2)`` array of ``(H, V)`` pairs.
    """
    s = np.linspace(0.0, 1.0, n)
    zero, h, v = np.zeros(n), h_final * s, v_final * s
    path1 = np.vstack([np.column_stack([zero, v]), np.column_stack([h, np.full(n, v_final)])])
    path2 = np.vstack([np.column_stack([h, zero]), np.column_stack([np.full(n, h_final), v])])
    path3 = np.column_stack([h, v])
    return {"path1": path1, "path2": path2, "path3": path3}


class TwoBarProblem(RiskProblem):
    design_names = ("r1", "r2")
    input_names = ("r1", "r2", "E", "sigma_u", "H", "V")
    static_inputs = np.array([True, True, True, True, False, False])
    system = True
    surrogate_group = "twobar"

    def __init__(self, name, params):
        super().__init__(name, params)
        p = params
        self.alpha = np.deg2rad(p["alpha_deg"])
        self.length = float(p["length"])
        if not 0.0 < self.alpha < np.pi / 2 or self.length <= 0:
            raise ValueError("two-bar geometry needs 0 < alpha < 90 deg and L > 0")
        self.modulus = MarginalDistribution.from_dict(p["modulus"])
        self.strength = MarginalDistribution.from_dict(p["ultimate_stress"])
        self.eoles = []
        for key in ("horizontal_load", "vertical_load"):
            ld = p[key]
            spec = GaussianProcessSpec(ld["mean"], ld["mean"] * ld["cov"], ld["corr_length"], self.horizon)
            self.eoles.append(build_eole(spec, eps=p["eole_eps"]))
        alpha, L = self.alpha, self.length

        def mode(i):
            def evaluate(x):
                r1, r2 = x[..., 0], x[..., 1]
                return twobar_limit_states(circle_area(r1), circle_area(r2), circle_inertia(r1),
                                           circle_inertia(r2), x[..., 2], x[..., 3],
                                           x[..., 4], x[..., 5], alpha, L)[i]
            return evaluate

        self.limit_states = [
            LimitStateEvaluator("g_t1", 6, mode(0), "tensile rupture of bar 1"),
            LimitStateEvaluator("g_b1", 6, mode(1), "buckling of bar 1"),
            LimitStateEvaluator("g_b2", 6, mode(2), "buckling of bar 2"),
        ]
        self._system = LimitStateEvaluator(f"{self.name}_system", 6, mode(3),
                                           "min of " + ", ".join(ls.name for ls in self.limit_states))

    def failure_events(self):
        # one pass over the three modes instead of one per mode
        return [self._system]

    def initial_cost(self, d) -> float:
        d = np.asarray(d, float)
        return self.params["cost"]["scale"] * float(circle_area(d[0]) + circle_area(d[1])) * self.length

    def sample_randomness(self, n_traj, seed) -> Randomness:
        r_static, r_h, r_v = spawn_seeds(seed, 3)
        times = self.times()
        z = r_static.standard_normal((n_traj, 2))
        H = sample_gp_trajectories(self.eoles[0], n_traj, times, r_h).values
        V = sample_gp_trajectories(self.eoles[1], n_traj, times, r_v).values
        return Randomness({"z": z, "H": H, "V": V}, n_traj, seed)

    def instantaneous_inputs(self, d, rnd, start=0, stop=None):
        z = rnd["z"][start:stop]
        H = rnd["H"][start:stop]
        n, n_t = H.shape
        # input-major storage keeps each column contiguous for the evaluators
        out = np.empty((6, n, n_t))
        out[0] = d[0]
        out[1] = d[1]
        out[2] = self.modulus.transform(z[:, 0])[:, None]
        out[3] = self.strength.transform(z[:, 1])[:, None]
        out[4] = H
        out[5] = rnd["V"][start:stop]
        return np.moveaxis(out, 0, -1)

    def mean_inputs(self, d, H, V):
        """Input rows at the mean material values for given load pairs."""
        H = np.asarray(H, float)
        out = np.empty(H.shape + (6,))
        out[..., 0], out[..., 1] = d[0], d[1]
        out[..., 2], out[..., 3] = self.modulus.mean, self.strength.mean
        out[..., 4], out[..., 5] = H, V
        return out

    def input_bounds(self, q_lo, q_hi):
        zl, zh = norm.ppf(q_lo), norm.ppf(q_hi)
        lo = list(self.design_box.lower) + [self.modulus.transform(zl), self.strength.transform(zl)]
        hi = list(self.design_box.upper) + [self.modulus.transform(zh), self.strength.transform(zh)]
        for key in ("horizontal_load", "vertical_load"):
            ld = self.params[key]
            lo.append(ld["mean"] * (1 + zl * ld["cov"]))
            hi.append(ld["mean"] * (1 + zh * ld["cov"]))
        return np.array(lo, float), np.array(hi, float)
