"""Benchmark risk-optimization problems and the name registry."""

from __future__ import annotations

from pathlib import Path

import yaml

from . import beam, truss23, twobar
from .base import DIRECT, EGRA_SURROGATE, RiskProblem, UnknownParameter, UnknownProblem, merge_params
from .beam import BeamProblem, beam_limit_state
from .truss23 import SingularStiffness, Truss23Problem, TrussGeometry, truss23_limit_state, truss_fe_solve
from .twobar import TwoBarProblem, scripted_paths, twobar_limit_states

PROBLEM_NAMES = tuple(beam.SCENARIOS) + tuple(truss23.SCENARIOS) + ("twobar",)


def default_params(name: str) -> dict:
    if name in beam.SCENARIOS:
        return merge_params(beam.DEFAULTS, {"corrosion": {"model": beam.SCENARIOS[name]}})
    if name in truss23.SCENARIOS:
        return merge_params(truss23.DEFAULTS, {"corrosion": {"model": truss23.SCENARIOS[name]}})
    if name == "twobar":
        return merge_params(twobar.DEFAULTS, None)
    raise UnknownProblem(f"unknown problem {name!r}; choose from {', '.join(PROBLEM_NAMES)}")


def make_problem(name: str, overrides: dict | None = None) -> RiskProblem:
    """Instantiate a benchmark problem with optional parameter overrides."""
    params = merge_params(default_params(name), overrides)
    if name in beam.SCENARIOS:
        return BeamProblem(name, params)
    if name in truss23.SCENARIOS:
        return Truss23Problem(name, params)
    return TwoBarProblem(name, params)


def load_config(path) -> dict:
    """Read a YAML run/problem config.

    Recognized top-level keys: ``problem`` (name), ``params`` (problem
    overrides), ``n_traj``, ``seeds``, ``method``, ``egra``, ``ego`` and ``pso``.
    """
    text = Path(path).read_text()
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a mapping")
    return data


def problem_from_config(data: dict) -> RiskProblem:
    if "problem" not in data:
        raise UnknownProblem("config lacks a 'problem' entry")
    return make_problem(data["problem"], data.get("params"))


__all__ = [
    "DIRECT", "EGRA_SURROGATE", "PROBLEM_NAMES", "BeamProblem", "RiskProblem", "SingularStiffness",
    "Truss23Problem", "TrussGeometry", "TwoBarProblem", "UnknownParameter", "UnknownProblem",
    "beam_limit_state", "default_params", "load_config", "make_problem", "problem_from_config",
    "scripted_paths", "truss23_limit_state", "truss_fe_solve", "twobar_limit_states",
]
