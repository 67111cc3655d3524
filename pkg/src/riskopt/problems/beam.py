"""Corroded steel beam under a random midspan load."""

from __future__ import annotations

import numpy as np
from scipy.stats import norm

from ..numerics import MarginalDistribution
from ..process import (Deterministic, GaussianProcessSpec, PulseProcess, PulseProcessSpec,
                       RandomVariable, build_eole, degradation_depth, sample_gp_trajectories)
from ..reliability import LimitStateEvaluator
from .base import EGRA_SURROGATE, Randomness, RiskProblem, spawn_seeds

MONTH = 1.0 / 12.0

DEFAULTS = {
    "length": 5.0,                  # m
    "unit_weight": 78.5e3,          # N/m^3
    "yield_stress": {"family": "lognormal", "mean": 240e6, "cov": 0.10},  # Pa
    "dimension_cov": 0.03,
    "load": {"mean": 6000.0, "cov": 0.3, "corr_length": MONTH},          # N
    "corrosion": {"model": "deterministic", "mean": 1e-3, "cov": 0.3, "period": 1.0},  # m/yr
    "horizon": 10.0,
    "dt": MONTH / 2,
    "eole_eps": 1e-3,
    "design_box": {"lower": [0.1, 0.01], "upper": [0.5, 0.06]},
    "cost": {"nu": 1.0 / 125.0, "failure_cost_multipliers": [1000.0],
             "discount_rate": 0.01, "periods": 10, "mode": "incremental"},
    "surrogate_policy": EGRA_SURROGATE,
}

SCENARIOS = {
    "beam_fixed": "deterministic",
    "beam_rv": "random_variable",
    "beam_pulse": "pulse",
}


def beam_limit_state(b, h, f_y, F, d_c, length=5.0, unit_weight=78.5e3):
    """Plastic-hinge margin at midspan of the corroded section.

    Corroded layers carry nothing; effective breadth and height are floored at 0.
    """
    b_eff = np.maximum(b - 2.0 * d_c, 0.0)
    h_eff = np.maximum(h - 2.0 * d_c, 0.0)
    resistance = b_eff * h_eff**2 * f_y / 4.0
    demand = F * length / 4.0 + unit_weight * b * h * length**2 / 8.0
    return resistance - demand


class BeamProblem(RiskProblem):
    design_names = ("b0", "h0")
    input_names = ("b", "h", "f_y", "F", "d_c")
    static_inputs = np.array([True, True, True, False, False])
    surrogate_group = "beam"

    def __init__(self, name, params):
        super().__init__(name, params)
        p = params
        self.fy = MarginalDistribution.from_dict(p["yield_stress"])
        load = p["load"]
        self.load_spec = GaussianProcessSpec(load["mean"], load["mean"] * load["cov"],
                                             load["corr_length"], self.horizon)
        self.eole = build_eole(self.load_spec, eps=p["eole_eps"])
        L, w = p["length"], p["unit_weight"]
        self.limit_states = [LimitStateEvaluator(
            "beam_plastic_hinge", 5,
            lambda x: beam_limit_state(x[..., 0], x[..., 1], x[..., 2], x[..., 3], x[..., 4], L, w),
            "plastic hinge at midspan of the corroded beam")]

    def kappa_model(self):
        c = self.params["corrosion"]
        if c["model"] == "deterministic":
            return Deterministic(c["mean"])
        dist = MarginalDistribution("lognormal", c["mean"], c["cov"])
        if c["model"] == "random_variable":
            return RandomVariable(dist)
        if c["model"] == "pulse":
            return PulseProcess(PulseProcessSpec(dist, c["period"], self.horizon))
        raise ValueError(f"unknown corrosion model {c['model']!r}")

    def dim_dist(self, mean):
        return MarginalDistribution("lognormal", mean, self.params["dimension_cov"])

    def initial_cost(self, d) -> float:
        return self.params["cost"]["nu"] * float(d[0]) * float(d[1])

    def sample_randomness(self, n_traj, seed) -> Randomness:
        r_static, r_load, r_corr = spawn_seeds(seed, 3)
        times = self.times()
        z = r_static.standard_normal((n_traj, 3))
        load = sample_gp_trajectories(self.eole, n_traj, times, r_load).values
        dc = degradation_depth(self.kappa_model(), times, n_traj, r_corr).values
        return Randomness({"z": z, "F": load, "d_c": dc}, n_traj, seed)

    def instantaneous_inputs(self, d, rnd, start=0, stop=None):
        z = rnd["z"][start:stop]
        F = rnd["F"][start:stop]
        n, n_t = F.shape
        # input-major storage keeps each column contiguous for the evaluators
        out = np.empty((5, n, n_t))
        out[0] = self.dim_dist(d[0]).transform(z[:, 0])[:, None]
        out[1] = self.dim_dist(d[1]).transform(z[:, 1])[:, None]
        out[2] = self.fy.transform(z[:, 2])[:, None]
        out[3] = F
        out[4] = rnd["d_c"][start:stop]
        return np.moveaxis(out, 0, -1)

    def max_depth(self, q_hi) -> float:
        c = self.params["corrosion"]
        T = self.horizon
        if c["model"] == "deterministic":
            return c["mean"] * T
        if c["model"] == "random_variable":
            return float(MarginalDistribution("lognormal", c["mean"], c["cov"]).ppf(q_hi)) * T
        # Fenton-Wilkinson lognormal fit of the sum of the renewal intensities
        n = int(np.ceil(T / c["period"] - 1e-9))
        mean = n * c["mean"] * c["period"]
        cov = c["cov"] / np.sqrt(n)
        return float(MarginalDistribution("lognormal", mean, cov).ppf(q_hi))

    def input_bounds(self, q_lo, q_hi):
        lo_box, hi_box = self.design_box.lower, self.design_box.upper
        zl, zh = norm.ppf(q_lo), norm.ppf(q_hi)
        load = self.params["load"]
        s = load["mean"] * load["cov"]
        lo = [self.dim_dist(lo_box[0]).transform(zl), self.dim_dist(lo_box[1]).transform(zl),
              self.fy.transform(zl), load["mean"] + zl * s, 0.0]
        hi = [self.dim_dist(hi_box[0]).transform(zh), self.dim_dist(hi_box[1]).transform(zh),
              self.fy.transform(zh), load["mean"] + zh * s, self.max_depth(q_hi)]
        return np.array(lo, float), np.array(hi, float)

