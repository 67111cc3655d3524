"""Dense linear algebra, sampling and marginal-distribution helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.stats import qmc


class NotPositiveDefinite(np.linalg.LinAlgError):
    pass


class NoConvergence(np.linalg.LinAlgError):
    pass


class InvalidMean(ValueError):
    pass


JITTER_START = 1e-10
JITTER_MAX = 1e-6


@dataclass(frozen=True)
class Bounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper must be 1-D arrays of equal length")
        if not np.all(lo < hi):
            raise ValueError(f"empty box: lower={lo}, upper={hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, x, atol: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower - atol) & (x <= self.upper + atol), axis=-1)

    def clip(self, x) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def union(self, other: "Bounds") -> "Bounds":
        return Bounds(np.minimum(self.lower, other.lower), np.maximum(self.upper, other.upper))

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


def cholesky(a, jitter: bool = True) -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive definite matrix.

    When the plain factorization fails, ``JITTER_START * mean(diag)`` is added
    to the diagonal and escalated tenfold up to ``JITTER_MAX * mean(diag)``.
    """
    a = np.asarray(a, dtype=float)
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        if not jitter:
            raise NotPositiveDefinite("matrix is not positive definite") from None
    scale = float(np.mean(np.diag(a)))
    if not scale > 0:
        raise NotPositiveDefinite("non-positive diagonal")
    eye = np.eye(a.shape[0])
    level = JITTER_START
    while level <= JITTER_MAX * (1 + 1e-9):
        try:
            return np.linalg.cholesky(a + level * scale * eye)
        except np.linalg.LinAlgError:
            level *= 10.0
    raise NotPositiveDefinite(f"not positive definite after jitter {JITTER_MAX:g}*mean(diag)")


def sym_eig(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a symmetric matrix, eigenvalues sorted decreasing.

    Returns ``(w, v)`` with ``v[:, i]`` the unit eigenvector of ``w[i]``.
    """
    a = np.asarray(a, dtype=float)
    try:
        w, v = np.linalg.eigh(0.5 * (a + a.T))
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    order = np.argsort(w)[::-1]
    return w[order], v[:, order]


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def lhs_sample(n: int, bounds: Bounds, seed=None) -> np.ndarray:
    """Latin hypercube sample of ``n`` points in ``bounds`` (random pairing)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    u = qmc.LatinHypercube(d=bounds.dim, seed=_rng(seed)).random(n)
    return bounds.lower + u * bounds.width


def sample_correlated_standard_normals(corr, n: int, seed=None) -> np.ndarray:
    """Draw ``n`` standard normal vectors with correlation matrix ``corr``."""
    corr = np.atleast_2d(np.asarray(corr, dtype=float))
    chol = cholesky(corr, jitter=False)
    z = _rng(seed).standard_normal((n, corr.shape[0]))
    return z @ chol.T


def lognormal_from_mean_cov(mean, cov) -> tuple:
    """Location ``zeta`` and scale ``delta`` of ``ln X`` for a lognormal ``X``."""
    mean = np.asarray(mean, dtype=float)
    if np.any(mean <= 0):
        raise InvalidMean("lognormal mean must be positive")
    if np.any(np.asarray(cov) < 0):
        raise ValueError("coefficient of variation must be nonnegative")
    delta = np.sqrt(np.log1p(np.square(cov)))
    zeta = np.log(mean) - 0.5 * delta**2
    if np.ndim(zeta) == 0:
        return float(zeta), float(delta)
    return zeta, delta


FAMILIES = ("normal", "lognormal", "deterministic")


@dataclass(frozen=True)
class MarginalDistribution:
    family: str
    mean: float
    cov: float = 0.0

    def __post_init__(self):
        fam = self.family.lower()
        object.__setattr__(self, "family", fam)
        if fam not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.cov < 0:
            raise ValueError("cov must be nonnegative")
        if fam == "lognormal" and self.mean <= 0:
            raise InvalidMean("lognormal mean must be positive")
        if fam == "deterministic" and self.cov != 0:
            raise ValueError("deterministic marginal requires cov = 0")

    @property
    def std(self) -> float:
        return abs(self.mean) * self.cov

    def transform(self, z):
        """Map standard normal values onto this marginal (isoprobabilistic)."""
        z = np.asarray(z, dtype=float)
        if self.family == "deterministic" or self.cov == 0:
            return np.full_like(z, self.mean)
        if self.family == "normal":
            return self.mean + self.std * z
        zeta, delta = lognormal_from_mean_cov(self.mean, self.cov)
        return np.exp(zeta + delta * z)

    def ppf(self, q):
        return self.transform(stats.norm.ppf(q))

    def sample(self, n: int, seed=None) -> np.ndarray:
        return self.transform(_rng(seed).standard_normal(n))

    def with_mean(self, mean: float) -> "MarginalDistribution":
        return MarginalDistribution(self.family, mean, self.cov)

    def to_dict(self) -> dict:
        return {"family": self.family, "mean": self.mean, "cov": self.cov}

    @classmethod
    def from_dict(cls, data) -> "MarginalDistribution":
        return cls(data["family"], float(data["mean"]), float(data.get("cov", 0.0)))
