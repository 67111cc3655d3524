import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from riskopt.problems import PROBLEM_NAMES, default_params, load_config, make_problem, problem_from_config
from riskopt.problems.base import UnknownParameter, UnknownProblem
from riskopt.problems.beam import beam_limit_state
from riskopt.problems.truss23 import (TrussGeometry, TrussModel, truss23_limit_state, truss_fe_solve,
                                      warren_geometry)
from riskopt.problems.twobar import bar_forces, scripted_paths, twobar_limit_states


# beam ----------------------------------------------------------------------

def test_beam_uncorroded_max_section_safe():
    g = beam_limit_state(0.5, 0.06, 240e6, 6000.0, 0.0)
    assert 0.5 * 0.06**2 * 240e6 / 4 == pytest.approx(108e3)
    assert g == pytest.approx(108e3 - 6000 * 5 / 4 - 78.5e3 * 0.5 * 0.06 * 25 / 8)
    assert g > 0


def test_beam_fully_corroded_and_load_monotone():
    assert beam_limit_state(0.3, 0.05, 240e6, 6000.0, 0.15) < 0
    F = np.linspace(0, 1e6, 50)
    g = beam_limit_state(0.3, 0.05, 240e6, F, 0.001)
    assert np.all(np.diff(g) < 0)


def test_beam_scenarios():
    p = make_problem("beam_fixed")
    assert p.params["corrosion"]["model"] == "deterministic"
    assert p.params["corrosion"]["mean"] == 1e-3
    assert p.params["load"] == {"mean": 6000.0, "cov": 0.3, "corr_length": 1 / 12}
    rnd = p.sample_randomness(3, 0)
    x = p.instantaneous_inputs(np.array([0.3, 0.03]), rnd)
    assert x.shape == (3, p.times().size, 5)
    np.testing.assert_allclose(x[:, -1, 4], 10e-3)
    assert np.all(x[:, :, 0] == x[:, :1, 0])   # static draws constant along time


# truss23 -------------------------------------------------------------------

GEOM = TrussGeometry.from_dict(warren_geometry())


def sparse_displacements(geom, E, A, P):
    """Independent direct-stiffness assembly with scipy.sparse."""
    rows, cols, vals = [], [], []
    for e, (i, j) in enumerate(geom.elements):
        t = geom.types[e] - 1
        dx, dy = geom.nodes[j] - geom.nodes[i]
        L = np.hypot(dx, dy)
        c, s = dx / L, dy / L
        k = E[t] * A[t] / L * np.array([[c * c, c * s], [c * s, s * s]])
        dofs = [2 * i, 2 * i + 1, 2 * j, 2 * j + 1]
        ke = np.block([[k, -k], [-k, k]])
        for a in range(4):
            for b in range(4):
                rows.append(dofs[a])
                cols.append(dofs[b])
                vals.append(ke[a, b])
    n = 2 * len(geom.nodes)
    K = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    f = np.zeros(n)
    for node in geom.loaded_nodes:
        f[2 * node + 1] = -P
    fixed = [2 * nd + k for nd, fx, fy in geom.supports for k, on in ((0, fx), (1, fy)) if on]
    free = np.setdiff1d(np.arange(n), fixed)
    u = np.zeros(n)
    u[free] = spla.spsolve(K[free][:, free].tocsc(), f[free])
    return u, K.toarray(), f


def test_geometry_counts():
    assert len(GEOM.nodes) == 13 and len(GEOM.elements) == 23
    assert np.bincount(GEOM.types).tolist() == [0, 6, 5, 12]


def test_single_bar_elongation():
    g = TrussGeometry.from_dict({
        "nodes": [[0.0, 0.0], [0.0, 2.0]], "elements": [[0, 1]], "types": [1],
        "supports": [[0, 1, 1], [1, 1, 0]], "loaded_nodes": [1], "monitored_node": 1})
    v = TrussModel(g).midspan_deflection(np.array([[210e9]]), np.array([[1e-4]]), 5e3)[0]
    assert v == pytest.approx(5e3 * 2.0 / (210e9 * 1e-4), rel=1e-12)


def test_fe_matches_sparse_oracle():
    E = np.array([210e9] * 3)
    A = np.pi * np.array([0.03, 0.03, 0.03]) ** 2
    u = truss_fe_solve(GEOM, E, A, 50e3)
    u_ref, K, f = sparse_displacements(GEOM, E, A, 50e3)
    np.testing.assert_allclose(u, u_ref, rtol=1e-10, atol=1e-10 * np.abs(u_ref).max())
    free = GEOM.free_dofs
    np.testing.assert_allclose((K @ u)[free], f[free], atol=1e-6 * 50e3)
    reactions = (K @ u)[np.setdiff1d(np.arange(GEOM.n_dof), free)]
    assert reactions.sum() == pytest.approx(6 * 50e3, rel=1e-10)


def test_fe_oracle_mixed_types():
    E = np.array([200e9, 215e9, 190e9])
    A = np.array([1.1e-3, 2.9e-3, 4.7e-3])
    np.testing.assert_allclose(truss_fe_solve(GEOM, E, A, 37e3), sparse_displacements(GEOM, E, A, 37e3)[0],
                               rtol=1e-10, atol=1e-14)


def test_symmetric_response():
    u = truss_fe_solve(GEOM, np.full(3, 210e9), np.full(3, 2e-3), 50e3)
    x = GEOM.nodes[:, 0]
    span = x.max()
    for i in range(len(GEOM.nodes)):
        j = int(np.argmin(np.abs(GEOM.nodes[:, 0] - (span - x[i])) + np.abs(GEOM.nodes[:, 1] - GEOM.nodes[i, 1])))
        assert u[2 * i + 1] == pytest.approx(u[2 * j + 1], rel=1e-10, abs=1e-14)
    assert np.all(u[1::2] <= 1e-15)


def test_limit_state_limits():
    model = TrussModel(GEOM)
    E = np.full((1, 3), 210e9)
    assert truss23_limit_state(model, E, np.full((1, 3), 1e4), 50e3)[0] == pytest.approx(0.1, abs=1e-7)
    assert truss23_limit_state(model, E, np.full((1, 3), 2e-3), 0.0)[0] == 0.1
    assert truss23_limit_state(model, E, np.array([[0.0, 1e-3, 1e-3]]), 50e3)[0] == -np.inf
    A = np.pi * 0.03**2
    v_ref = -sparse_displacements(GEOM, E[0], np.full(3, A), 50e3)[0][2 * GEOM.monitored_node + 1]
    assert truss23_limit_state(model, E, np.full((1, 3), A), 50e3)[0] == pytest.approx(0.1 - v_ref, rel=1e-10)


def test_truss_batch_equals_single():
    model = TrussModel(GEOM)
    rng = np.random.default_rng(0)
    E = rng.uniform(180e9, 240e9, (50, 3))
    A = rng.uniform(1e-3, 5e-3, (50, 3))
    P = rng.uniform(30e3, 70e3, 50)
    batch = model.midspan_deflection(E, A, P, chunk=7)
    single = [model.midspan_deflection(E[i], A[i], P[i])[0] for i in range(50)]
    np.testing.assert_allclose(batch, single, rtol=1e-12)


def test_truss_case3_parameters():
    p = make_problem("truss23_case3")
    c = p.params["corrosion"]
    assert c["model"] == "pulse" and c["mean"] == 10e-6 and c["cov"] == 0.3
    assert np.allclose(np.array(c["correlation"])[np.triu_indices(3, 1)], 0.8)


# two-bar -------------------------------------------------------------------

def test_bar_forces_statics():
    alpha = np.deg2rad(45.0)
    n1, n2 = bar_forces(2000.0, 0.0, alpha)
    assert n1 == pytest.approx(n2) and n1 == pytest.approx(2000 / np.sqrt(2))
    n1, n2 = bar_forces(0.0, 1000.0, alpha)
    assert n1 == pytest.approx(-n2)


def test_unloaded_gives_resistances():
    A, I = np.pi * 0.004**2, np.pi * 0.004**4 / 4
    out = twobar_limit_states(A, A, I, I, 70e9, 24.5643e6, 0.0, 0.0, np.pi / 4, 0.34)
    assert out[0] == pytest.approx(A * 24.5643e6)
    assert out[1] == pytest.approx(np.pi**2 * 70e9 * I / 0.34**2)
    assert min(out[:3]) > 0


def test_twobar_parameters():
    p = make_problem("twobar")
    assert p.modulus.mean == 70e9 and p.modulus.cov == 0.03 and p.modulus.family == "normal"
    assert p.strength.mean == 24.5643e6 and p.strength.cov == 0.10
    assert p.params["vertical_load"]["mean"] == 1000.0
    assert p.params["horizontal_load"]["mean"] == 2000.0


def test_load_path_narrative():
    p = make_problem("twobar")
    d = np.array([0.004, 0.0052])
    g = {ls.name: ls for ls in p.limit_states}
    res = {}
    for name, path in scripted_paths().items():
        x = p.mean_inputs(d, path[:, 0], path[:, 1])
        res[name] = {k: ev(x) for k, ev in g.items()}
    assert res["path1"]["g_b1"].min() <= 0
    assert res["path2"]["g_t1"].min() <= 0
    assert min(v.min() for v in res["path3"].values()) > 0
    # both end points coincide: the failure is due to the path, not the final state
    end = {k: v[-1] for k, v in res["path3"].items()}
    assert all(v > 0 for v in end.values())


# registry ------------------------------------------------------------------

def test_registry_and_overrides(tmp_path):
    assert set(PROBLEM_NAMES) >= {"beam_fixed", "beam_rv", "beam_pulse", "truss23_case1",
                                  "truss23_case2", "truss23_case3", "twobar"}
    with pytest.raises(UnknownProblem):
        make_problem("bridge")
    with pytest.raises(UnknownParameter):
        make_problem("beam_fixed", {"no_such_key": 1})
    p = make_problem("beam_fixed", {"horizon": 5.0, "cost": {"periods": 5}})
    assert p.horizon == 5.0 and p.cost_spec.periods == 5
    assert default_params("beam_fixed")["horizon"] == 10.0
    cfg = tmp_path / "c.yaml"
    cfg.write_text("problem: twobar\nparams:\n  length: 0.5\n")
    data = load_config(cfg)
    assert problem_from_config(data).length == 0.5
