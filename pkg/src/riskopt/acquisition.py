"""Learning functions for adaptive enrichment and their discrete maximization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .kriging import KrigingModel, predict


@dataclass(frozen=True)
class CandidateSet:
    points: np.ndarray
    provenance: str = "ego_design_space"

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] < 1:
            raise ValueError("candidate set is empty")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]


def expected_improvement(mean, variance, y_min):
    """Expected improvement below ``y_min`` for a normal prediction.

    Vanishing variance falls back to the limit ``max(y_min - mean, 0)``.
    """
    mean = np.asarray(mean, dtype=float)
    sigma = np.sqrt(np.maximum(np.asarray(variance, dtype=float), 0.0))
    diff = y_min - mean
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sigma > 0, diff / np.where(sigma > 0, sigma, 1.0), 0.0)
        ei = diff * norm.cdf(z) + sigma * norm.pdf(z)
    ei = np.where(sigma > 0, ei, np.maximum(diff, 0.0))
    ei = np.maximum(ei, 0.0)
    return ei[()] if ei.ndim == 0 else ei


def expected_feasibility(mean, variance, threshold: float = 0.0, band_factor: float = 2.0):
    """Expected feasibility ``E[max(eps - |G - threshold|, 0)]`` with ``eps = band_factor * sigma``."""
    mean = np.asarray(mean, dtype=float)
    sigma = np.sqrt(np.maximum(np.asarray(variance, dtype=float), 0.0))
    eps = band_factor * sigma
    safe = np.where(sigma > 0, sigma, 1.0)
    t0 = (threshold - mean) / safe
    tm = (threshold - eps - mean) / safe
    tp = (threshold + eps - mean) / safe
    ef = ((mean - threshold) * (2 * norm.cdf(t0) - norm.cdf(tm) - norm.cdf(tp))
          - sigma * (2 * norm.pdf(t0) - norm.pdf(tm) - norm.pdf(tp))
          + eps * (norm.cdf(tp) - norm.cdf(tm)))
    ef = np.where(sigma > 0, np.maximum(ef, 0.0), 0.0)
    return ef[()] if ef.ndim == 0 else ef


def argmax_learning(model: KrigingModel, candidates: CandidateSet, fn: str = "eff", *,
                    y_min: float | None = None, threshold: float = 0.0,
                    band_factor: float = 2.0, exclude=None):
    """Candidate with the largest learning-function value.

    ``fn`` is ``"ei"`` (needs ``y_min``) or ``"eff"``. Ties go to the lowest
    index. ``exclude`` is an optional boolean mask of candidates to skip.
    Returns ``(point, value, index, values)``.
    """
    pred = predict(model, candidates.points)
    if fn == "ei":
        if y_min is None:
            raise ValueError("expected improvement needs y_min")
        values = expected_improvement(pred.mean, pred.variance, y_min)
    elif fn == "eff":
        values = expected_feasibility(pred.mean, pred.variance, threshold, band_factor)
    else:
        raise ValueError(f"unknown learning function {fn!r}")
    values = np.atleast_1d(values)
    return (*_argmax(candidates.points, values, exclude), values)


def _argmax(points, values, exclude=None):
    vals = values if exclude is None else np.where(exclude, -np.inf, values)
    idx = int(np.argmax(vals))  # first occurrence on ties
    return points[idx], float(values[idx]), idx
