"""Ordinary Kriging with a constant trend, fitted by maximum likelihood.

Inputs are rescaled to [0, 1] per dimension over the bounding box of the
experimental design and responses are standardized before fitting. The
correlation length ``theta`` is therefore expressed in normalized units.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .numerics import Bounds, NotPositiveDefinite, cholesky, lhs_sample

logger = logging.getLogger(__name__)

FAMILIES = {"matern52": _kernels.MATERN52, "gaussian": _kernels.GAUSSIAN}
THETA_BOUNDS = (1e-3, 1e2)
SIGMA2_FLOOR = np.finfo(float).eps
DUPLICATE_TOL = 1e-12
SCHEMA_VERSION = 1


class DuplicatePoint(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class SingularCorrelation(np.linalg.LinAlgError):
    pass


def matern52(x, x2, theta) -> float:
    """Tensor-product Matérn 5/2 correlation between two points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    theta = np.broadcast_to(np.asarray(theta, dtype=float), x.shape)
    if np.any(theta <= 0):
        raise ValueError("theta must be positive")
    return float(_kernels._corr(x, x2, 1.0 / theta, _kernels.MATERN52))


def gaussian_corr(x, x2, theta) -> float:
    """Tensor-product Gaussian correlation ``exp(-sum(((x - x2) / theta)**2))``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    theta = np.broadcast_to(np.asarray(theta, dtype=float), x.shape)
    if np.any(theta <= 0):
        raise ValueError("theta must be positive")
    return float(_kernels._corr(x, x2, 1.0 / theta, _kernels.GAUSSIAN))


@dataclass(frozen=True)
class ExperimentalDesign:
    points: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.points, dtype=float))
        y = np.asarray(self.responses, dtype=float).ravel()
        if x.shape[0] != y.size:
            raise ValueError("points and responses differ in length")
        if x.shape[0] < 2:
            raise ValueError("an experimental design needs at least 2 points")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("experimental design contains non-finite values")
        object.__setattr__(self, "points", x)
        object.__setattr__(self, "responses", y)
        dup = _find_duplicate(x)
        if dup is not None:
            raise DuplicatePoint(f"design points {dup[0]} and {dup[1]} coincide")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def _find_duplicate(x: np.ndarray):
    order = np.lexsort(x.T[::-1])
    xs = x[order]
    for i in range(1, len(xs)):
        # exact sort neighbours are checked first, then a full scan of close rows
        if np.all(np.abs(xs[i] - xs[i - 1]) <= DUPLICATE_TOL):
            return int(order[i - 1]), int(order[i])
    if len(x) <= 2000:
        diff = np.max(np.abs(x[:, None, :] - x[None, :, :]), axis=-1)
        np.fill_diagonal(diff, np.inf)
        i, j = np.unravel_index(np.argmin(diff), diff.shape)
        if diff[i, j] <= DUPLICATE_TOL:
            return int(min(i, j)), int(max(i, j))
    return None


def is_duplicate(points: np.ndarray, x, tol: float = DUPLICATE_TOL) -> bool:
    points = np.atleast_2d(points)
    return bool(np.any(np.all(np.abs(points - np.asarray(x, dtype=float)) <= tol, axis=1)))


@dataclass(frozen=True)
class Prediction:
    mean: np.ndarray
    variance: np.ndarray

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)


@dataclass(frozen=True)
class _Factor:
    chol: np.ndarray
    alpha: np.ndarray
    l_inv_ones: np.ndarray
    ones_r_ones: float
    beta: float
    sigma2: float
    log_psi: float


@dataclass(frozen=True)
class KrigingModel:
    design: ExperimentalDesign
    theta: np.ndarray
    corr_family: str
    input_shift: np.ndarray
    input_scale: np.ndarray
    output_shift: float
    output_scale: float
    trend_beta: float
    process_variance: float
    chol_R: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    l_inv_ones: np.ndarray = field(repr=False)
    ones_r_ones: float = 1.0
    log_likelihood_psi: float = 0.0
    degenerate: bool = False

    @property
    def dim(self) -> int:
        return self.design.dim

    @property
    def n(self) -> int:
        return self.design.n

    @property
    def family_code(self) -> int:
        return FAMILIES[self.corr_family]

    @property
    def beta(self) -> float:
        """Trend in physical response units."""
        return self.output_shift + self.output_scale * self.trend_beta

    @property
    def sigma2(self) -> float:
        """Process variance in physical response units."""
        return self.output_scale**2 * self.process_variance

    def normalized_points(self) -> np.ndarray:
        return (self.design.points - self.input_shift) / self.input_scale

    def predict(self, x, return_var: bool = True) -> Prediction:
        return predict(self, x, return_var=return_var)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "ordinary_kriging",
            "corr_family": self.corr_family,
            "points": self.design.points.tolist(),
            "responses": self.design.responses.tolist(),
            "theta": self.theta.tolist(),
            "trend_beta": self.trend_beta,
            "process_variance": self.process_variance,
            "input_shift": self.input_shift.tolist(),
            "input_scale": self.input_scale.tolist(),
            "output_shift": self.output_shift,
            "output_scale": self.output_scale,
            "degenerate": self.degenerate,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_dict(cls, data: dict) -> "KrigingModel":
        design = ExperimentalDesign(np.array(data["points"]), np.array(data["responses"]))
        shift = np.array(data["input_shift"], dtype=float)
        scale = np.array(data["input_scale"], dtype=float)
        yshift = float(data["output_shift"])
        yscale = float(data["output_scale"])
        theta = np.array(data["theta"], dtype=float)
        u = (design.points - shift) / scale
        z = (design.responses - yshift) / yscale
        fac = _factorize(u, z, theta, FAMILIES[data["corr_family"]])
        return _assemble(design, theta, data["corr_family"], shift, scale, yshift, yscale, fac,
                         degenerate=bool(data.get("degenerate", False)))

    @classmethod
    def from_json(cls, text_or_path) -> "KrigingModel":
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            with open(text) as fh:
                text = fh.read()
        return cls.from_dict(json.loads(text))


def _factorize(u: np.ndarray, z: np.ndarray, theta: np.ndarray, family: int) -> _Factor:
    n = u.shape[0]
    R = _kernels.corr_matrix_sym(u, 1.0 / theta, family)
    try:
        L = cholesky(R)
    except NotPositiveDefinite as exc:
        raise SingularCorrelation(str(exc)) from exc
    from scipy.linalg import solve_triangular

    ones = np.ones(n)
    l1 = solve_triangular(L, ones, lower=True)
    lz = solve_triangular(L, z, lower=True)
    c = float(l1 @ l1)
    beta = float(l1 @ lz) / c
    resid = lz - beta * l1
    sigma2 = float(resid @ resid) / n
    alpha = solve_triangular(L.T, resid, lower=False)
    log_det = 2.0 * float(np.sum(np.log(np.diag(L))))
    log_psi = np.log(max(sigma2, SIGMA2_FLOOR)) + log_det / n
    return _Factor(L, alpha, l1, c, beta, sigma2, log_psi)


def reduced_likelihood(u, z, theta, family: str = "matern52") -> float:
    """Reduced likelihood ``sigma2(theta) * det(R(theta))**(1/n)`` (to be minimized).

    ``u`` and ``z`` are the normalized inputs and responses.
    """
    fac = _factorize(np.atleast_2d(u), np.asarray(z, float), np.asarray(theta, float),
                     FAMILIES[family])
    return float(np.exp(fac.log_psi))


def _assemble(design, theta, family, shift, scale, yshift, yscale, fac: _Factor, degenerate=False):
    return KrigingModel(
        design=design,
        theta=np.asarray(theta, dtype=float),
        corr_family=family,
        input_shift=shift,
        input_scale=scale,
        output_shift=yshift,
        output_scale=yscale,
        trend_beta=fac.beta,
        process_variance=max(fac.sigma2, SIGMA2_FLOOR),
        chol_R=fac.chol,
        alpha=fac.alpha,
        l_inv_ones=fac.l_inv_ones,
        ones_r_ones=fac.ones_r_ones,
        log_likelihood_psi=fac.log_psi,
        degenerate=degenerate,
    )


def _log_psi(log_theta, u, z, family):
    try:
        return _factorize(u, z, np.exp(log_theta), family).log_psi
    except SingularCorrelation:
        return np.inf


def fit(design: ExperimentalDesign, corr_family: str = "matern52", *, theta0=None,
        n_starts: int = 5, n_screen: int | None = None, seed=0,
        theta_bounds=THETA_BOUNDS) -> KrigingModel:
    """Fit an ordinary Kriging model by minimizing the reduced likelihood.

    The search runs Nelder-Mead on ``log(theta)`` from ``n_starts`` starting
    points: ``theta0`` when given, completed by the best points of a Latin
    hypercube screening of the search box.
    """
    if corr_family not in FAMILIES:
        raise ValueError(f"unknown correlation family {corr_family!r}")
    family = FAMILIES[corr_family]
    x, y = design.points, design.responses
    shift = x.min(axis=0)
    scale = x.max(axis=0) - shift
    scale[scale == 0] = 1.0
    u = (x - shift) / scale
    yshift = float(np.mean(y))
    yscale = float(np.std(y))
    d = design.dim

    if not yscale > 1e-12 * max(1.0, abs(yshift)):
        theta = np.full(d, 1.0) if theta0 is None else np.asarray(theta0, float)
        fac = _factorize(u, np.zeros_like(y), theta, family)
        fac = _Factor(fac.chol, np.zeros_like(fac.alpha), fac.l_inv_ones, fac.ones_r_ones,
                      0.0, SIGMA2_FLOOR, fac.log_psi)
        logger.debug("degenerate responses: constant model")
        return _assemble(design, theta, corr_family, shift, 1.0 * scale, yshift, 1.0, fac,
                         degenerate=True)

    z = (y - yshift) / yscale
    lb = np.full(d, np.log(theta_bounds[0]))
    ub = np.full(d, np.log(theta_bounds[1]))
    box = Bounds(lb, ub)
    starts = []
    if theta0 is not None:
        starts.append(np.clip(np.log(np.asarray(theta0, float)), lb, ub))
    n_random = max(n_starts - len(starts), 0)
    if n_random:
        n_screen = n_screen or max(20, 10 * d)
        cand = lhs_sample(n_screen, box, seed=seed)
        vals = np.array([_log_psi(c, u, z, family) for c in cand])
        starts.extend(cand[np.argsort(vals, kind="stable")[:n_random]])

    best_x, best_f = None, np.inf
    for x0 in starts:
        res = minimize(_log_psi, x0, args=(u, z, family), method="Nelder-Mead",
                       bounds=list(zip(lb, ub)),
                       options={"xatol": 1e-4, "fatol": 1e-10, "maxiter": 200 * d})
        f = res.fun if np.isfinite(res.fun) else np.inf
        if f < best_f:
            best_x, best_f = res.x, f
    if best_x is None:
        raise SingularCorrelation("correlation matrix singular for every start")
    theta = np.exp(best_x)
    fac = _factorize(u, z, theta, family)
    return _assemble(design, theta, corr_family, shift, scale, yshift, yscale, fac)


def predict(model: KrigingModel, x, return_var: bool = True) -> Prediction:
    """Kriging mean and variance at the rows of ``x`` (a single vector is allowed)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != model.dim:
        raise DimensionMismatch(f"expected {model.dim} inputs, got {x.shape[1]}")
    u = np.ascontiguousarray((x - model.input_shift) / model.input_scale)
    m = x.shape[0]
    mean = np.empty(m)
    var = np.empty(m)
    _kernels.predict_points(u, np.ascontiguousarray(model.normalized_points()),
                            1.0 / model.theta, model.family_code, model.alpha,
                            model.trend_beta, model.chol_R, model.l_inv_ones,
                            model.ones_r_ones, return_var, mean, var)
    mean = model.output_shift + model.output_scale * mean
    if return_var:
        var = np.maximum(var, 0.0) * model.process_variance * model.output_scale**2
    else:
        var = np.full(m, np.nan)
    if single:
        return Prediction(mean[0], var[0])
    return Prediction(mean, var)


def raw_variance_bracket(model: KrigingModel, x) -> np.ndarray:
    """Unclamped variance bracket, for checking roundoff below zero."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    u = np.ascontiguousarray((x - model.input_shift) / model.input_scale)
    mean = np.empty(len(u))
    var = np.empty(len(u))
    _kernels.predict_points(u, np.ascontiguousarray(model.normalized_points()),
                            1.0 / model.theta, model.family_code, model.alpha,
                            model.trend_beta, model.chol_R, model.l_inv_ones,
                            model.ones_r_ones, True, mean, var)
    return var


def add_point(model: KrigingModel, x, y, *, n_starts: int = 2, seed=0) -> KrigingModel:
    """Refit on the design enlarged by ``(x, y)``.

    The likelihood search is warm-started at the previous ``theta`` (converted
    to the new input scaling) plus ``n_starts - 1`` screened starts.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size != model.dim:
        raise DimensionMismatch(f"expected {model.dim} inputs, got {x.size}")
    if is_duplicate(model.design.points, x):
        raise DuplicatePoint("point already in the experimental design")
    pts = np.vstack([model.design.points, x])
    resp = np.append(model.design.responses, float(y))
    design = ExperimentalDesign(pts, resp)
    new_scale = pts.max(axis=0) - pts.min(axis=0)
    new_scale[new_scale == 0] = 1.0
    theta0 = np.clip(model.theta * model.input_scale / new_scale, *THETA_BOUNDS)
    return fit(design, model.corr_family, theta0=theta0, n_starts=n_starts, seed=seed)
