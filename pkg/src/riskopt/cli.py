"""Command-line front end.

Subcommands: ``run`` (optimization over seeds), ``grid`` (cost scan for contour
plots), ``validate`` (fast self-checks) and ``report`` (figures and summary
table from a results directory).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from itertools import product
from pathlib import Path

import numpy as np

from .cost import total_cost
from .framework import CostFunction, ReliabilityBackend, build_surrogates
from .numerics import NoConvergence
from .optimizer import EgoConfig, PsoConfig, ego_optimize, pso_optimize, write_trace_csv
from .problems import PROBLEM_NAMES, UnknownParameter, UnknownProblem, load_config, make_problem
from .problems.base import DIRECT
from .reliability import EgraConfig, EgraReport, ExcessiveExtrapolation

logger = logging.getLogger("riskopt")

SCHEMA_VERSION = 1
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
MAX_GRID_DIM = 3


class ConfigError(ValueError):
    pass


class DimensionTooHigh(ConfigError):
    pass


@dataclass
class RunConfig:
    problem: str
    method: str = "ego"
    seeds: list = field(default_factory=lambda: [1])
    n_traj: int = 10_000
    final_n_traj: int = 100_000
    params: dict = field(default_factory=dict)
    egra: dict = field(default_factory=dict)
    ego: dict = field(default_factory=dict)
    pso: dict = field(default_factory=dict)
    out: str = "results"
    shared_surrogate: bool = True

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.method not in ("ego", "pso", "grid"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.n_traj < 1:
            raise ConfigError("n_traj must be >= 1")
        for name, cls in (("egra", EgraConfig), ("ego", EgoConfig), ("pso", PsoConfig)):
            known = {f.name for f in fields(cls)}
            bad = set(getattr(self, name)) - known
            if bad:
                raise ConfigError(f"unknown {name} options: {', '.join(sorted(bad))}")


def parse_seeds(text) -> list[int]:
    """``"3"``, ``"1..30"`` or ``"1,4,9"``."""
    if isinstance(text, int):
        return [text]
    if isinstance(text, list):
        return [int(s) for s in text]
    text = str(text).strip()
    try:
        if ".." in text:
            a, b = text.split("..")
            a, b = int(a), int(b)
            if b < a:
                raise ConfigError(f"empty seed range {text!r}")
            return list(range(a, b + 1))
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad seed specification {text!r}") from exc


def thread_cap() -> int:
    raw = os.environ.get("RISKOPT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"RISKOPT_THREADS must be an integer, got {raw!r}") from None


def dump_json(data, path) -> None:
    Path(path).write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# --------------------------------------------------------------------- surrogates

def _companions(problem, params):
    if problem.surrogate_group is None:
        return []
    from .problems import beam, truss23
    group = {"beam": beam.SCENARIOS, "truss23": truss23.SCENARIOS}.get(problem.surrogate_group, {})
    return [make_problem(n, params) for n in group if n != problem.name]


def surrogate_path(out: Path, problem) -> Path:
    return out / f"surrogate_{problem.surrogate_group or problem.name}.json"


def obtain_surrogates(cfg: RunConfig, problem, out: Path) -> dict | None:
    """Build the limit-state surrogates or reuse a matching checkpoint."""
    if problem.surrogate_policy == DIRECT:
        return None
    egra = EgraConfig(**cfg.egra)
    comps = _companions(problem, cfg.params) if cfg.shared_surrogate else []
    path = surrogate_path(out, problem) if cfg.shared_surrogate else out / f"surrogate_{problem.name}.json"
    meta = {"egra": asdict(egra), "params": _jsonable(cfg.params),
            "problems": sorted([problem.name] + [c.name for c in comps]) if comps else [problem.name]}
    if path.exists():
        data = json.loads(path.read_text())
        if data.get("meta") == _jsonable(meta):
            logger.info("reusing surrogate checkpoint %s", path)
            return {k: EgraReport.from_dict(v) for k, v in data["reports"].items()}
    reports = build_surrogates(problem, egra, comps)
    dump_json({"schema_version": SCHEMA_VERSION, "meta": _jsonable(meta),
               "reports": {k: r.to_dict() for k, r in reports.items()}}, path)
    return reports


def surrogate_summary(reports) -> dict | None:
    if not reports:
        return None
    return {k: {"n_limit_state_calls": r.n_limit_state_calls, "converged": r.converged,
                "n_enrichments": len(r.enrichment_history),
                "max_eff_trace": [float(e) for _, _, e in r.enrichment_history]}
            for k, r in reports.items()}


# --------------------------------------------------------------------- runs

def _seed_streams(seed):
    ss = np.random.SeedSequence(seed)
    opt, mc, final = ss.spawn(3)
    return int(opt.generate_state(1)[0]), mc, final


def run_single(cfg: RunConfig, seed: int, reports) -> dict:
    problem = make_problem(cfg.problem, cfg.params)
    opt_seed, mc_seed, final_seed = _seed_streams(seed)
    backend = ReliabilityBackend(problem, cfg.n_traj, mc_seed, reports)
    cost_fn = CostFunction(problem, backend)
    box = problem.design_box
    if cfg.method == "ego":
        res = ego_optimize(cost_fn, box, EgoConfig(**{**cfg.ego, "seed": opt_seed}))
        extra = {"converged": res.converged, "doe_history": res.to_dict()["doe_history"]}
    else:
        res = pso_optimize(cost_fn, box, PsoConfig(**{**cfg.pso, "seed": opt_seed}))
        extra = {"n_generations": res.n_generations}
    _, breakdown = total_cost(res.d_star, problem, backend)
    out = {
        "schema_version": SCHEMA_VERSION,
        "problem": problem.name,
        "method": cfg.method,
        "seed": seed,
        "n_traj": cfg.n_traj,
        "design_names": list(problem.design_names),
        "d_star": [float(v) for v in res.d_star],
        "c_star": float(res.c_star),
        "n_cost_calls": res.n_cost_calls,
        "breakdown": breakdown.to_dict(),
        "trace": res.trace,
        "surrogate": surrogate_summary(reports),
        **extra,
    }
    if cfg.final_n_traj:
        fb = ReliabilityBackend(problem, cfg.final_n_traj, final_seed, reports)
        _, fbd = total_cost(res.d_star, problem, fb)
        out["final"] = {"n_traj": cfg.final_n_traj, **fbd.to_dict()}
    return _jsonable(out)


def _run_seed(args):
    cfg, seed, reports = args
    return run_single(cfg, seed, reports)


SUMMARY_FIELDS = ("c_star", "n_cost_calls")


def summarize(results: list[dict]) -> list[dict]:
    """Mean and standard deviation across runs of each design variable, C_T* and calls."""
    names = results[0]["design_names"]
    cols = {n: [r["d_star"][i] for r in results] for i, n in enumerate(names)}
    for key in SUMMARY_FIELDS:
        cols[key] = [r[key] for r in results]
    rows = []
    for key, vals in cols.items():
        a = np.array(vals, float)
        std = float(np.std(a, ddof=1)) if a.size > 1 else 0.0
        rows.append({"quantity": key, "mean": float(np.mean(a)), "std": std, "n_runs": a.size})
    return rows


def write_summary(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["quantity", "mean", "std", "n_runs"])
        for r in rows:
            w.writerow([r["quantity"], repr(r["mean"]), repr(r["std"]), r["n_runs"]])


def cmd_run(cfg: RunConfig, as_json: bool = False) -> int:
    if cfg.method == "grid":
        return cmd_grid(cfg, resolution=50, seed=cfg.seeds[0], as_json=as_json)
    make_problem(cfg.problem, cfg.params)  # fail on config errors before writing anything
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    problem = make_problem(cfg.problem, cfg.params)
    reports = obtain_surrogates(cfg, problem, out)
    workers = min(thread_cap(), len(cfg.seeds))
    jobs = [(cfg, s, reports) for s in cfg.seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_seed, jobs))
    else:
        results = [_run_seed(j) for j in jobs]
    stem = f"{problem.name}_{cfg.method}"
    for res in results:
        dump_json(res, out / f"run_{stem}_seed{res['seed']}.json")
    rows = summarize(results)
    write_summary(rows, out / f"summary_{stem}.csv")
    if as_json:
        print(json.dumps({"summary": rows, "runs": len(results)}, sort_keys=True))
    else:
        for r in rows:
            print(f"{r['quantity']:>14s}  mean={r['mean']:.6g}  std={r['std']:.3g}")
    return 0


def cmd_grid(cfg: RunConfig, resolution: int, seed: int, as_json: bool = False) -> int:
    problem = make_problem(cfg.problem, cfg.params)
    box = problem.design_box
    if box.dim > MAX_GRID_DIM:
        raise DimensionTooHigh(f"grid scans support at most {MAX_GRID_DIM} design variables")
    if resolution < 1:
        raise ConfigError("resolution must be >= 1")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = obtain_surrogates(cfg, problem, out)
    _, mc_seed, _ = _seed_streams(seed)
    backend = ReliabilityBackend(problem, cfg.n_traj, mc_seed, reports)
    axes = [np.array([c]) if resolution == 1 else np.linspace(lo, hi, resolution)
            for lo, hi, c in zip(box.lower, box.upper, box.center)]
    path = out / f"grid_{problem.name}.csv"
    n = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(problem.design_names) + ["total_cost"])
        for d in product(*axes):
            c, _ = total_cost(np.array(d), problem, backend)
            w.writerow([repr(float(v)) for v in d] + [repr(float(c))])
            n += 1
    msg = {"grid": str(path), "rows": n}
    print(json.dumps(msg) if as_json else f"wrote {n} rows to {path}")
    return 0


def cmd_validate(as_json: bool = False) -> int:
    from .validation import run_checks
    checks = run_checks()
    ok = all(c["passed"] for c in checks)
    if as_json:
        print(json.dumps({"passed": ok, "checks": checks}, sort_keys=True))
    else:
        for c in checks:
            print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}: {c['detail']}")
    return 0 if ok else 1


def cmd_report(out: str, as_json: bool = False) -> int:
    from .plotting import render_report
    written, rows = render_report(Path(out))
    if as_json:
        print(json.dumps({"figures": [str(p) for p in written], "summary": rows}, sort_keys=True))
    else:
        print("problem,method,quantity,mean,std,n_runs")
        for r in rows:
            print(f"{r['problem']},{r['method']},{r['quantity']},{r['mean']!r},{r['std']!r},{r['n_runs']}")
        for p in written:
            print(f"figure: {p}")
    return 0


# --------------------------------------------------------------------- argument parsing

class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors; exit code 2 is kept for numerical failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="riskopt", description="Time-variant risk optimization "
                                 "with nested adaptive Kriging surrogates.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--problem", help=", ".join(PROBLEM_NAMES))
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--n-traj", type=int)
        p.add_argument("--out")
        p.add_argument("--json", action="store_true")
        p.add_argument("--no-shared-surrogate", action="store_true",
                       help="fit the limit-state surrogate on this scenario's space only")

    run = sub.add_parser("run", help="optimize over one or more seeds")
    common(run)
    run.add_argument("--method", choices=("ego", "pso", "grid"))
    run.add_argument("--seeds", help="a, a..b or a,b,c")
    run.add_argument("--pso-generations", type=int)
    run.add_argument("--max-cost-calls", type=int)
    run.add_argument("--final-n-traj", type=int, help="trajectories for the final report at d* (0 skips)")

    grid = sub.add_parser("grid", help="total-cost scan over a uniform design grid")
    common(grid)
    grid.add_argument("--resolution", type=int, default=50)
    grid.add_argument("--seed", type=int, default=1)

    val = sub.add_parser("validate", help="fast self-checks against closed forms")
    val.add_argument("--json", action="store_true")

    rep = sub.add_parser("report", help="figures and summary table from a results directory")
    rep.add_argument("--out", default="results")
    rep.add_argument("--json", action="store_true")
    return ap


def config_from_args(args) -> RunConfig:
    data = {}
    if args.config:
        try:
            data = load_config(args.config)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    problem = args.problem or data.get("problem")
    if problem is None:
        raise ConfigError("a problem name is required (--problem or 'problem' in the config)")
    kw = {
        "problem": problem,
        "params": data.get("params") or {},
        "egra": dict(data.get("egra") or {}),
        "ego": dict(data.get("ego") or {}),
        "pso": dict(data.get("pso") or {}),
        "method": getattr(args, "method", None) or data.get("method", "ego"),
        "seeds": parse_seeds(getattr(args, "seeds", None) or data.get("seeds", 1)),
        "n_traj": args.n_traj or data.get("n_traj", 10_000),
        "out": args.out or data.get("out", "results"),
        "shared_surrogate": not args.no_shared_surrogate and data.get("shared_surrogate", True),
    }
    final = getattr(args, "final_n_traj", None)
    kw["final_n_traj"] = final if final is not None else data.get("final_n_traj", 100_000)
    if getattr(args, "pso_generations", None) is not None:
        kw["pso"]["max_generations"] = args.pso_generations
    if getattr(args, "max_cost_calls", None) is not None:
        kw["ego"]["max_cost_calls"] = args.max_cost_calls
    extra = set(data) - {f.name for f in fields(RunConfig)} - {"resolution", "seed"}
    if extra:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(extra))}")
    return RunConfig(**kw)


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            return cmd_validate(args.json)
        if args.command == "report":
            return cmd_report(args.out, args.json)
        cfg = config_from_args(args)
        make_problem(cfg.problem, cfg.params)
        if args.command == "grid":
            return cmd_grid(cfg, args.resolution, args.seed, args.json)
        return cmd_run(cfg, args.json)
    except (ConfigError, UnknownProblem, UnknownParameter, TypeError, ValueError) as exc:
        if isinstance(exc, np.linalg.LinAlgError):
            print(f"riskopt: numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        print(f"riskopt: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (np.linalg.LinAlgError, ExcessiveExtrapolation, NoConvergence, FloatingPointError) as exc:
        print(f"riskopt: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
