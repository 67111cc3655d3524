"""Compiled inner loops for correlation and prediction.

Every loop runs point by point so that batched and single-point calls give
bit-identical results.
"""

import numpy as np
from numba import njit

MATERN52 = 0
GAUSSIAN = 1

_S5 = np.sqrt(5.0)


@njit(cache=True)
def _corr(a, b, inv_theta, family):
    poly = 1.0
    hs = 0.0
    for k in range(a.shape[0]):
        h = abs(a[k] - b[k]) * inv_theta[k]
        if family == MATERN52:
            poly *= 1.0 + _S5 * h + (5.0 / 3.0) * h * h
            hs += h
        else:
            hs += h * h
    if family == MATERN52:
        return poly * np.exp(-_S5 * hs)
    return np.exp(-hs)


@njit(cache=True)
def corr_matrix(U, V, inv_theta, family):
    m = U.shape[0]
    n = V.shape[0]
    out = np.empty((m, n))
    for i in range(m):
        for j in range(n):
            out[i, j] = _corr(U[i], V[j], inv_theta, family)
    return out


@njit(cache=True)
def corr_matrix_sym(U, inv_theta, family):
    n = U.shape[0]
    out = np.empty((n, n))
    for i in range(n):
        out[i, i] = 1.0
        for j in range(i):
            c = _corr(U[i], U[j], inv_theta, family)
            out[i, j] = c
            out[j, i] = c
    return out


@njit(cache=True)
def predict_points(U, D, inv_theta, family, alpha, beta, L, l_inv_ones, ones_r_ones,
                   want_var, out_mean, out_var):
    """Ordinary Kriging mean and variance (in normalized output units).

    ``out_var`` receives the bracket ``1 - r'R^-1 r + u^2 / (1'R^-1 1)`` before
    multiplication by the process variance and before clamping.
    """
    m = U.shape[0]
    n = D.shape[0]
    r = np.empty(n)
    v = np.empty(n)
    for i in range(m):
        acc = beta
        for j in range(n):
            r[j] = _corr(U[i], D[j], inv_theta, family)
            acc += alpha[j] * r[j]
        out_mean[i] = acc
        if want_var:
            # forward substitution L v = r
            for j in range(n):
                s = r[j]
                for k in range(j):
                    s -= L[j, k] * v[k]
                v[j] = s / L[j, j]
            rr = 0.0
            ur = 0.0
            for j in range(n):
                rr += v[j] * v[j]
                ur += l_inv_ones[j] * v[j]
            u = ur - 1.0
            out_var[i] = 1.0 - rr + u * u / ones_r_ones


@njit(cache=True)
def first_failure_surrogate(X, static, lo, hi, D, inv_theta, family, alpha, beta,
                            y_shift, y_scale, threshold, first, n_eval_out):
    """First index along axis 1 where the surrogate mean drops to ``threshold``.

    ``X`` has shape (n_traj, n_times, k) in the same units as ``D`` and
    ``inv_theta`` (the caller folds input scaling into both); ``static``
    flags input columns that are constant along each trajectory (read at
    time index 0). Inputs are clamped to [lo, hi]. ``first`` receives -1 for
    trajectories that never fail. ``n_eval_out`` receives
    (evaluations, evaluations needing clamping).
    """
    n_traj = X.shape[0]
    n_t = X.shape[1]
    k_dim = X.shape[2]
    n = D.shape[0]
    w = np.empty(n)
    n_eval = 0
    n_clamp = 0
    for i in range(n_traj):
        clamped_static = False
        for k in range(k_dim):
            if static[k]:
                x = X[i, 0, k]
                if x < lo[k] or x > hi[k]:
                    clamped_static = True
        for j in range(n):
            poly = 1.0
            hs = 0.0
            for k in range(k_dim):
                if static[k]:
                    x = min(max(X[i, 0, k], lo[k]), hi[k])
                    h = abs(x - D[j, k]) * inv_theta[k]
                    if family == MATERN52:
                        poly *= 1.0 + _S5 * h + (5.0 / 3.0) * h * h
                        hs += h
                    else:
                        hs += h * h
            if family == MATERN52:
                w[j] = alpha[j] * poly * np.exp(-_S5 * hs)
            else:
                w[j] = alpha[j] * np.exp(-hs)
        first[i] = -1
        for t in range(n_t):
            acc = beta
            clamped = clamped_static
            for k in range(k_dim):
                if not static[k]:
                    x = X[i, t, k]
                    if x < lo[k] or x > hi[k]:
                        clamped = True
            for j in range(n):
                poly = 1.0
                hs = 0.0
                for k in range(k_dim):
                    if not static[k]:
                        x = min(max(X[i, t, k], lo[k]), hi[k])
                        h = abs(x - D[j, k]) * inv_theta[k]
                        if family == MATERN52:
                            poly *= 1.0 + _S5 * h + (5.0 / 3.0) * h * h
                            hs += h
                        else:
                            hs += h * h
                if family == MATERN52:
                    acc += w[j] * poly * np.exp(-_S5 * hs)
                else:
                    acc += w[j] * np.exp(-hs)
            n_eval += 1
            if clamped:
                n_clamp += 1
            if y_shift + y_scale * acc <= threshold:
                first[i] = t
                break
    n_eval_out[0] = n_eval
    n_eval_out[1] = n_clamp
