"""23-bar plane truss with corroding circular bars.

The default geometry is a six-bay Warren truss (span 24 m, height 2 m):
seven lower-chord nodes, six upper-chord nodes, pin support at the left end
and roller at the right end. Bar type 1 is the lower chord, type 2 the
upper chord and type 3 the diagonals. All of it can be replaced through the
``geometry`` parameter block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from ..numerics import MarginalDistribution, cholesky
from ..process import (GaussianProcessSpec, PulseProcessSpec, build_eole, cumulative_pulse_depth,
                       sample_gp_trajectories, sample_pulse_segments)
from ..reliability import LimitStateEvaluator
from .base import EGRA_SURROGATE, Randomness, RiskProblem, spawn_seeds


class SingularStiffness(np.linalg.LinAlgError):
    pass


def warren_geometry(n_bays: int = 6, bay: float = 4.0, height: float = 2.0) -> dict:
    lower = [[i * bay, 0.0] for i in range(n_bays + 1)]
    upper = [[(i + 0.5) * bay, height] for i in range(n_bays)]
    nodes = lower + upper
    nl = n_bays + 1
    elements, types = [], []
    for i in range(n_bays):
        elements.append([i, i + 1])
        types.append(1)
    for i in range(n_bays - 1):
        elements.append([nl + i, nl + i + 1])
        types.append(2)
    for i in range(n_bays):
        elements.append([i, nl + i])
        types.append(3)
        elements.append([nl + i, i + 1])
        types.append(3)
    return {
        "nodes": nodes,
        "elements": elements,
        "types": types,
        "supports": [[0, 1, 1], [n_bays, 0, 1]],   # node, fix x, fix y
        "loaded_nodes": list(range(nl, nl + n_bays)),
        "monitored_node": n_bays // 2,
    }


@dataclass(frozen=True)
class TrussGeometry:
    nodes: np.ndarray
    elements: np.ndarray
    types: np.ndarray
    supports: np.ndarray
    loaded_nodes: np.ndarray
    monitored_node: int

    @classmethod
    def from_dict(cls, g: dict) -> "TrussGeometry":
        return cls(np.asarray(g["nodes"], float), np.asarray(g["elements"], int),
                   np.asarray(g["types"], int), np.asarray(g["supports"], int),
                   np.asarray(g["loaded_nodes"], int), int(g["monitored_node"]))

    @property
    def n_dof(self) -> int:
        return 2 * len(self.nodes)

    @property
    def n_types(self) -> int:
        return int(self.types.max())

    @property
    def free_dofs(self) -> np.ndarray:
        fixed = set()
        for node, fx, fy in self.supports:
            if fx:
                fixed.add(2 * node)
            if fy:
                fixed.add(2 * node + 1)
        return np.array([i for i in range(self.n_dof) if i not in fixed])

    def element_lengths(self) -> np.ndarray:
        a, b = self.nodes[self.elements[:, 0]], self.nodes[self.elements[:, 1]]
        return np.linalg.norm(b - a, axis=1)

    def unit_stiffness(self) -> np.ndarray:
        """Per-element global stiffness for EA/L = 1, shape (n_elem, n_dof, n_dof)."""
        n_e = len(self.elements)
        K = np.zeros((n_e, self.n_dof, self.n_dof))
        a, b = self.nodes[self.elements[:, 0]], self.nodes[self.elements[:, 1]]
        lengths = self.element_lengths()
        cs = (b - a) / lengths[:, None]
        for e, (i, j) in enumerate(self.elements):
            v = np.zeros(self.n_dof)
            v[[2 * i, 2 * i + 1]] = -cs[e]
            v[[2 * j, 2 * j + 1]] = cs[e]
            K[e] = np.outer(v, v)
        return K

    def unit_load(self) -> np.ndarray:
        f = np.zeros(self.n_dof)
        f[2 * self.loaded_nodes + 1] = -1.0
        return f


class TrussModel:
    """Linear bar-element model; solves ``K u = f`` in batches."""

    def __init__(self, geometry: TrussGeometry):
        self.geometry = geometry
        self.free = geometry.free_dofs
        self.lengths = geometry.element_lengths()
        K1 = geometry.unit_stiffness()[:, self.free][:, :, self.free]
        self.K_unit = K1.reshape(len(K1), -1)
        self.f_unit = geometry.unit_load()[self.free]
        self.monitor = int(np.nonzero(self.free == 2 * geometry.monitored_node + 1)[0][0])
        self._type_idx = geometry.types - 1

    def element_stiffness(self, E, A) -> np.ndarray:
        """EA/L per element from per-type moduli and areas, shape (..., n_elem)."""
        E = np.asarray(E, float)
        A = np.asarray(A, float)
        return E[..., self._type_idx] * A[..., self._type_idx] / self.lengths

    def solve(self, E, A, load) -> np.ndarray:
        """Free-DOF displacements for per-type ``E``, ``A`` (shape (..., n_types)) and load."""
        E = np.atleast_2d(E)
        A = np.atleast_2d(A)
        load = np.atleast_1d(np.asarray(load, float))
        k = self.element_stiffness(E, A)
        nf = len(self.free)
        K = (k @ self.K_unit).reshape(-1, nf, nf)
        rhs = load.reshape(-1, 1) * self.f_unit
        try:
            u = np.linalg.solve(K, rhs[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise SingularStiffness(str(exc)) from exc
        return u

    def full_displacements(self, E, A, load) -> np.ndarray:
        u = self.solve(E, A, load)
        out = np.zeros((u.shape[0], self.geometry.n_dof))
        out[:, self.free] = u
        return out

    def midspan_deflection(self, E, A, load, chunk: int = 4000) -> np.ndarray:
        """Downward displacement of the monitored node; ``-inf``-safe for failed sections."""
        E = np.atleast_2d(np.asarray(E, float))
        A = np.atleast_2d(np.asarray(A, float))
        load = np.broadcast_to(np.asarray(load, float), (E.shape[0],))
        out = np.full(E.shape[0], np.inf)
        ok = np.all(A > 0, axis=1) & np.all(E > 0, axis=1)
        idx = np.nonzero(ok)[0]
        for s in range(0, idx.size, chunk):
            sl = idx[s:s + chunk]
            try:
                u = self.solve(E[sl], A[sl], load[sl])
                out[sl] = -u[:, self.monitor]
            except SingularStiffness:
                for i in sl:
                    try:
                        out[i] = -self.solve(E[i], A[i], load[i])[0, self.monitor]
                    except SingularStiffness:
                        out[i] = np.inf
        return out


def truss_fe_solve(geometry: TrussGeometry, E, A, loads) -> np.ndarray:
    """Full nodal displacement vector for a single configuration."""
    return TrussModel(geometry).full_displacements(E, A, loads)[0]


CORR = [[1.0, 0.8, 0.8], [0.8, 1.0, 0.8], [0.8, 0.8, 1.0]]

DEFAULTS = {
    "geometry": warren_geometry(),
    "modulus": {"family": "lognormal", "mean": 210e9, "cov": 0.10},   # Pa
    "area_cov": 0.10,
    "load": {"mean": 50e3, "std": 7.5e3, "corr_length": 1.0},         # N
    "corrosion": {"model": "deterministic", "mean": 10e-6, "cov": 0.3,
                  "period": 1.0, "correlation": CORR},                  # m/yr
    "max_deflection": 0.1,
    "horizon": 30.0,
    "dt": 0.5,
    "eole_eps": 1e-3,
    "design_box": {"lower": [0.02, 0.02, 0.02], "upper": [0.04, 0.04, 0.04]},
    "cost": {"scale": 1e4, "failure_cost_multipliers": [10.0],
             "discount_rate": 0.01, "periods": 30, "mode": "incremental"},
    "surrogate_policy": EGRA_SURROGATE,
}

SCENARIOS = {
    "truss23_case1": "deterministic",
    "truss23_case2": "random_variable",
    "truss23_case3": "pulse",
}


def truss23_limit_state(model: TrussModel, E, A, load, max_deflection=0.1):
    """``max_deflection - V1``; sections corroded away give ``-inf``."""
    return max_deflection - model.midspan_deflection(E, A, load)


class Truss23Problem(RiskProblem):
    design_names = ("r1", "r2", "r3")
    input_names = ("E1", "E2", "E3", "A1", "A2", "A3", "P")
    surrogate_group = "truss23"

    def __init__(self, name, params):
        super().__init__(name, params)
        p = params
        self.geometry = TrussGeometry.from_dict(p["geometry"])
        self.model = TrussModel(self.geometry)
        self.modulus = MarginalDistribution.from_dict(p["modulus"])
        load = p["load"]
        self.load_spec = GaussianProcessSpec(load["mean"], load["std"], load["corr_length"], self.horizon)
        self.eole = build_eole(self.load_spec, eps=p["eole_eps"])
        nt = self.geometry.n_types
        self.n_types = nt
        dmax = p["max_deflection"]
        model = self.model

        def evaluate(x):
            shape = x.shape[:-1]
            flat = x.reshape(-1, x.shape[-1])
            g = truss23_limit_state(model, flat[:, :nt], flat[:, nt:2 * nt], flat[:, 2 * nt], dmax)
            return g.reshape(shape)

        self.limit_states = [LimitStateEvaluator("truss23_deflection", 2 * nt + 1, evaluate,
                                                 "midspan deflection below the allowed value")]
        # corroded areas change with time, only the moduli are static
        self.static_inputs = np.array([True] * nt + [False] * (nt + 1))

    def area_dist(self, r):
        return MarginalDistribution("lognormal", np.pi * r**2, self.params["area_cov"])

    def initial_cost(self, d) -> float:
        return self.params["cost"]["scale"] * float(np.sum(np.square(d)))

    def sample_randomness(self, n_traj, seed) -> Randomness:
        r_e, r_a, r_load, r_corr = spawn_seeds(seed, 4)
        times = self.times()
        nt = self.n_types
        zE = r_e.standard_normal((n_traj, nt))
        zA = r_a.standard_normal((n_traj, nt))
        load = sample_gp_trajectories(self.eole, n_traj, times, r_load).values
        c = self.params["corrosion"]
        dist = MarginalDistribution("lognormal", c["mean"], c["cov"])
        if c["model"] == "deterministic":
            dc = np.broadcast_to((c["mean"] * times)[None, :, None], (1, times.size, nt))
        elif c["model"] == "random_variable":
            z = r_corr.standard_normal((n_traj, nt)) @ cholesky(np.asarray(c["correlation"]), jitter=False).T
            dc = dist.transform(z)[:, None, :] * times[None, :, None]
        elif c["model"] == "pulse":
            spec = PulseProcessSpec(dist, c["period"], self.horizon, np.asarray(c["correlation"]))
            seg = sample_pulse_segments(spec, n_traj, r_corr)
            dc = np.stack([cumulative_pulse_depth(seg[:, :, k], times, c["period"])
                           for k in range(nt)], axis=2)
        else:
            raise ValueError(f"unknown corrosion model {c['model']!r}")
        return Randomness({"zE": zE, "zA": zA, "P": load, "d_c": dc}, n_traj, seed)

    def instantaneous_inputs(self, d, rnd, start=0, stop=None):
        nt = self.n_types
        P = rnd["P"][start:stop]
        n, n_t = P.shape
        dc = rnd["d_c"]
        dc = dc if dc.shape[0] == 1 else dc[start:stop]
        out = np.empty((n, n_t, 2 * nt + 1))
        out[:, :, :nt] = self.modulus.transform(rnd["zE"][start:stop])[:, None, :]
        a0 = np.stack([self.area_dist(d[k]).transform(rnd["zA"][start:stop, k]) for k in range(nt)], axis=1)
        r0 = np.sqrt(a0 / np.pi)
        out[:, :, nt:2 * nt] = np.pi * np.maximum(r0[:, None, :] - dc, 0.0) ** 2
        out[:, :, 2 * nt] = P
        return out

    def max_depth(self, q_hi) -> float:
        c = self.params["corrosion"]
        T = self.horizon
        dist = MarginalDistribution("lognormal", c["mean"], c["cov"])
        if c["model"] == "deterministic":
            return c["mean"] * T
        if c["model"] == "random_variable":
            return float(dist.ppf(q_hi)) * T
        n = int(np.ceil(T / c["period"] - 1e-9))
        return float(MarginalDistribution("lognormal", n * c["mean"] * c["period"],
                                          c["cov"] / np.sqrt(n)).ppf(q_hi))

    def input_bounds(self, q_lo, q_hi):
        nt = self.n_types
        zl, zh = norm.ppf(q_lo), norm.ppf(q_hi)
        lo_box, hi_box = self.design_box.lower, self.design_box.upper
        e_lo, e_hi = self.modulus.transform(zl), self.modulus.transform(zh)
        dmax = self.max_depth(q_hi)
        a_lo = [np.pi * max(np.sqrt(self.area_dist(lo_box[k]).transform(zl) / np.pi) - dmax, 0.0) ** 2
                for k in range(nt)]
        a_hi = [self.area_dist(hi_box[k]).transform(zh) for k in range(nt)]
        load = self.params["load"]
        lo = [e_lo] * nt + a_lo + [load["mean"] + zl * load["std"]]
        hi = [e_hi] * nt + a_hi + [load["mean"] + zh * load["std"]]
        return np.array(lo, float), np.array(hi, float)
