"""Fast self-checks against closed forms and quadrature, used by ``riskopt validate``."""

from __future__ import annotations

import numpy as np
from scipy import integrate
from scipy.stats import norm

from . import acquisition
from .kriging import ExperimentalDesign, fit, predict
from .numerics import Bounds, lhs_sample
from .process import GaussianProcessSpec, build_eole
from .reliability import LimitStateEvaluator, estimate_pfc, pfc_from_first_failure


def quad_ei(mu, sigma, y_min):
    f = lambda y: max(y_min - y, 0.0) * norm.pdf(y, mu, sigma)
    return integrate.quad(f, mu - 12 * sigma, y_min, epsabs=1e-12, epsrel=1e-10, limit=200)[0] \
        if y_min > mu - 12 * sigma else 0.0


def quad_eff(mu, sigma, zbar, band_factor=2.0):
    eps = band_factor * sigma
    f = lambda y: max(eps - abs(y - zbar), 0.0) * norm.pdf(y, mu, sigma)
    return integrate.quad(f, zbar - eps, zbar + eps, points=[zbar], epsabs=1e-12,
                          epsrel=1e-10, limit=200)[0]


def random_triples(n=100, seed=0):
    rng = np.random.default_rng(seed)
    mu = rng.uniform(-3, 3, n)
    sigma = rng.uniform(0.05, 3, n)
    ref = rng.uniform(-3, 3, n)
    return mu, sigma, ref


def check_ei(n=100, tol=1e-6):
    mu, s, y = random_triples(n, 1)
    got = acquisition.expected_improvement(mu, s**2, y)
    ref = np.array([quad_ei(a, b, c) for a, b, c in zip(mu, s, y)])
    err = float(np.max(np.abs(got - ref)))
    return err < tol, f"max |EI - quadrature| = {err:.2e} over {n} triples"


def check_eff(n=100, tol=1e-6):
    mu, s, z = random_triples(n, 2)
    got = np.array([acquisition.expected_feasibility(a, b**2, c) for a, b, c in zip(mu, s, z)])
    ref = np.array([quad_eff(a, b, c) for a, b, c in zip(mu, s, z)])
    err = float(np.max(np.abs(got - ref)))
    return err < tol, f"max |EFF - quadrature| = {err:.2e} over {n} triples"


def check_interpolation(tol=1e-8):
    box = Bounds(np.zeros(3), np.ones(3))
    x = lhs_sample(25, box, 7)
    y = np.sin(3 * x[:, 0]) + x[:, 1] ** 2 - x[:, 2]
    model = fit(ExperimentalDesign(x, y), seed=0)
    err = float(np.max(np.abs(predict(model, x).mean - y)))
    return err < tol, f"max interpolation error = {err:.2e}"


def check_eole_trace():
    spec = GaussianProcessSpec(0.0, 1.0, 0.1, 1.0)
    eps = 1e-3
    exp = build_eole(spec, eps=eps)
    lam = exp.eigvals
    total = float(np.trace(exp.corr_matrix_nodes))
    r = exp.order
    ok = lam.sum() >= (1 - eps) * total and (r == 1 or lam[:-1].sum() < (1 - eps) * total)
    return bool(ok), f"order {r} retains {lam.sum() / total:.6f} of the trace"


def check_pfc_monotone():
    rng = np.random.default_rng(3)
    times = np.linspace(0, 10, 101)
    first = rng.integers(-1, 101, 5000)
    curve = pfc_from_first_failure(first, times, np.linspace(0, 10, 11))
    ok = bool(np.all(np.diff(curve.pfc) >= 0) and curve.pfc[0] >= 0 and curve.pfc[-1] <= 1)
    return ok, f"pfc from {curve.pfc[0]:.4f} to {curve.pfc[-1]:.4f}, nondecreasing={ok}"


def check_static_reliability(n=100_000):
    rng = np.random.default_rng(11)
    r = rng.normal(12.0, 1.0, n)
    s = rng.normal(8.0, 2.0, n)
    times = np.array([0.0, 1.0])
    x = np.broadcast_to(np.stack([r, s], axis=1)[:, None, :], (n, 2, 2))
    ev = LimitStateEvaluator("r_minus_s", 2, lambda v: v[..., 0] - v[..., 1])
    curve = estimate_pfc(ev, x, times, times)
    exact = norm.cdf(-4.0 / np.sqrt(5.0))
    se = np.sqrt(exact * (1 - exact) / n)
    dev = abs(curve.pfc[-1] - exact)
    return bool(dev <= 3 * se), f"pfc = {curve.pfc[-1]:.5f}, exact {exact:.5f}, {dev / se:.2f} SE"


CHECKS = {
    "expected_improvement_quadrature": check_ei,
    "expected_feasibility_quadrature": check_eff,
    "kriging_interpolation": check_interpolation,
    "eole_trace_bound": check_eole_trace,
    "pfc_monotone": check_pfc_monotone,
    "static_reliability_closed_form": check_static_reliability,
}


def run_checks() -> list[dict]:
    out = []
    for name, fn in CHECKS.items():
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append({"name": name, "passed": bool(ok), "detail": detail})
    return out
