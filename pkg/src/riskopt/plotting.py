"""Figures for ``riskopt report``, rendered off-screen to PNG files."""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def load_runs(out: Path) -> dict:
    groups = defaultdict(list)
    for path in sorted(out.glob("run_*.json")):
        data = json.loads(path.read_text())
        groups[(data["problem"], data["method"])].append(data)
    for runs in groups.values():
        runs.sort(key=lambda r: r["seed"])
    return dict(groups)


def _summary_rows(problem, method, runs):
    from .cli import summarize
    return [{"problem": problem, "method": method, **row} for row in summarize(runs)]


def boxplots(problem, method, runs, out: Path) -> Path:
    names = runs[0]["design_names"]
    fig, axes = plt.subplots(1, len(names) + 1, figsize=(3 * (len(names) + 1), 3.2))
    for i, name in enumerate(names):
        axes[i].boxplot([r["d_star"][i] for r in runs])
        axes[i].set_title(name)
    axes[-1].boxplot([r["c_star"] for r in runs])
    axes[-1].set_title("total cost")
    for ax in axes:
        ax.set_xticks([])
    fig.suptitle(f"{problem} ({method}, {len(runs)} runs)")
    fig.tight_layout()
    path = out / f"fig_{problem}_{method}_optima.png"
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def convergence(problem, method, runs, out: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    for r in runs:
        costs = np.array([t["cost"] for t in r["trace"]], float)
        ax.plot(np.arange(1, costs.size + 1), np.minimum.accumulate(costs), lw=0.8)
    ax.set_xlabel("cost-function call" if method == "ego" else "generation")
    ax.set_ylabel("best total cost")
    ax.set_yscale("log")
    ax.set_title(problem)
    fig.tight_layout()
    path = out / f"fig_{problem}_{method}_convergence.png"
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def pfc_curves(problem, method, runs, out: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    best = min(runs, key=lambda r: r["c_star"])
    for j, c in enumerate(best["breakdown"]["pfc_curves"]):
        t = np.array(c["boundaries"])
        p = np.array(c["pfc"])
        se = np.array(c["std_error"])
        ax.step(t, p, where="post", label=f"event {j + 1}")
        ax.fill_between(t, p - 2 * se, p + 2 * se, step="post", alpha=0.25)
    ax.set_xlabel("time")
    ax.set_ylabel("cumulative failure probability")
    ax.legend()
    ax.set_title(f"{problem}, seed {best['seed']}")
    fig.tight_layout()
    path = out / f"fig_{problem}_{method}_pfc.png"
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def grid_contour(path: Path, out: Path) -> Path | None:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array(rows[1:], float)
    if len(header) != 3 or data.shape[0] < 4:
        return None
    x, y = np.unique(data[:, 0]), np.unique(data[:, 1])
    z = data[:, 2].reshape(x.size, y.size).T
    fig, ax = plt.subplots(figsize=(5, 4))
    cs = ax.contourf(x, y, np.log10(z), levels=30)
    fig.colorbar(cs, ax=ax, label="log10 total cost")
    k = int(np.argmin(data[:, 2]))
    ax.plot(data[k, 0], data[k, 1], "r*", ms=10)
    ax.set_xlabel(header[0])
    ax.set_ylabel(header[1])
    fig.tight_layout()
    fig_path = out / f"fig_{path.stem}.png"
    fig.savefig(fig_path, dpi=110)
    plt.close(fig)
    return fig_path


def render_report(out: Path):
    """Render every figure available from the files in ``out``.

    Returns the list of written figures and the summary rows.
    """
    if not out.is_dir():
        raise FileNotFoundError(f"no results directory {out}")
    written, rows = [], []
    for (problem, method), runs in load_runs(out).items():
        rows.extend(_summary_rows(problem, method, runs))
        written.append(boxplots(problem, method, runs, out))
        written.append(convergence(problem, method, runs, out))
        written.append(pfc_curves(problem, method, runs, out))
    for g in sorted(out.glob("grid_*.csv")):
        p = grid_contour(g, out)
        if p is not None:
            written.append(p)
    return written, rows
