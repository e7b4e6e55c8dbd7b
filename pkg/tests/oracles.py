"""Independent reference solvers used only by the tests.

Every routine here deliberately takes a different computational path from
the library: accelerated projected gradient instead of conditional gradient,
dense dummy-variable least squares instead of closed-form double differences,
exhaustive grid search, and alternating demeaning instead of one-shot dummy
regression.  None of them import from the library's solver internals.
"""

from __future__ import annotations

import itertools

import numpy as np


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, v.size + 1) > (css - 1.0))[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def simplex_ridge_oracle(
    columns: np.ndarray,
    target: np.ndarray,
    penalty: float,
    intercept: bool,
    ridge_floor: float = 1e-12,
    tol: float = 1e-10,
    max_iter: int = 400_000,
) -> tuple[np.ndarray, float]:
    """Accelerated projected-gradient minimizer of
    ||w0 + columns @ w - target||^2 + penalty^2 * rows * ||w||^2 over the
    simplex, with w0 profiled out when ``intercept``.

    Returns the weights and the attained objective (including the intercept
    term on the original data).
    """
    A = np.asarray(columns, dtype=np.float64)
    b = np.asarray(target, dtype=np.float64)
    rows, m = A.shape
    if intercept:
        Ad = A - A.mean(axis=0)
        bd = b - b.mean()
    else:
        Ad, bd = A, b
    ridge = penalty * penalty * rows
    if ridge == 0.0:
        scale = max(float(np.abs(A).max()), float(np.abs(b).max()), 1.0)
        ridge = ridge_floor * scale * scale
    G = Ad.T @ Ad + ridge * np.eye(m)
    h = Ad.T @ bd

    lipschitz = 2.0 * float(np.linalg.eigvalsh(G)[-1])
    w = np.full(m, 1.0 / m)
    z = w.copy()
    t = 1.0
    f_prev = float(w @ G @ w - 2.0 * h @ w)
    for _ in range(max_iter):
        grad = 2.0 * (G @ z - h)
        w_new = project_to_simplex(z - grad / lipschitz)
        f_new = float(w_new @ G @ w_new - 2.0 * h @ w_new)
        if f_new > f_prev:
            z = w_new.copy()
            t = 1.0
            w, f_prev = w_new, f_new
            continue
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = w_new + ((t - 1.0) / t_new) * (w_new - w)
        done = abs(f_prev - f_new) < tol * max(abs(f_prev), 1e-300)
        w, t, f_prev = w_new, t_new, f_new
        if done:
            break
    w0 = float(np.mean(b - A @ w)) if intercept else 0.0
    resid = w0 + A @ w - b
    return w, float(resid @ resid + ridge * (w @ w))


def simplex_grid(dim: int, resolution: float) -> np.ndarray:
    """All simplex points whose coordinates are multiples of ``resolution``,
    enumerated by bar positions (stars and bars)."""
    steps = round(1.0 / resolution)
    if dim == 1:
        return np.ones((1, 1))
    bars = np.array(
        list(itertools.combinations(range(steps + dim - 1), dim - 1)), dtype=np.int64
    )
    padded = np.column_stack(
        [np.full(len(bars), -1), bars, np.full(len(bars), steps + dim - 1)]
    )
    counts = np.diff(padded, axis=1) - 1
    return counts.astype(np.float64) / steps


def grid_search_objective(
    columns: np.ndarray,
    target: np.ndarray,
    penalty: float,
    intercept: bool,
    resolution: float,
    ridge_floor: float = 1e-12,
) -> float:
    """Exhaustive simplex grid minimum of the same objective."""
    A = np.asarray(columns, dtype=np.float64)
    b = np.asarray(target, dtype=np.float64)
    rows, m = A.shape
    ridge = penalty * penalty * rows
    if ridge == 0.0:
        scale = max(float(np.abs(A).max()), float(np.abs(b).max()), 1.0)
        ridge = ridge_floor * scale * scale
    grid = simplex_grid(m, resolution)
    fitted = grid @ A.T
    resid = fitted - b
    if intercept:
        resid = resid - resid.mean(axis=1, keepdims=True)
    objs = np.einsum("ij,ij->i", resid, resid) + ridge * np.einsum("ij,ij->i", grid, grid)
    return float(objs.min())


def refined_grid_objective(
    columns: np.ndarray,
    target: np.ndarray,
    penalty: float,
    intercept: bool,
    coarse: float,
    fine: float,
) -> float:
    """Two-stage grid search: full coarse sweep, then a fine sweep of the
    simplex patch around the coarse minimizer."""
    A = np.asarray(columns, dtype=np.float64)
    b = np.asarray(target, dtype=np.float64)
    rows, m = A.shape
    ridge = penalty * penalty * rows
    if ridge == 0.0:
        scale = max(float(np.abs(A).max()), float(np.abs(b).max()), 1.0)
        ridge = 1e-12 * scale * scale

    def objective(points: np.ndarray) -> np.ndarray:
        resid = points @ A.T - b
        if intercept:
            resid = resid - resid.mean(axis=1, keepdims=True)
        return np.einsum("ij,ij->i", resid, resid) + ridge * np.einsum(
            "ij,ij->i", points, points
        )

    grid = simplex_grid(m, coarse)
    objs = objective(grid)
    best = grid[int(np.argmin(objs))]
    best_obj = float(objs.min())

    offsets = np.arange(-coarse, coarse + fine / 2, fine)
    mesh = np.stack(np.meshgrid(*([offsets] * (m - 1)), indexing="ij"), axis=-1)
    heads = best[: m - 1] + mesh.reshape(-1, m - 1)
    lasts = 1.0 - heads.sum(axis=1)
    ok = np.all(heads >= -1e-12, axis=1) & (lasts >= -1e-12)
    if ok.any():
        local = np.column_stack([np.maximum(heads[ok], 0.0), np.maximum(lasts[ok], 0.0)])
        local = local / local.sum(axis=1, keepdims=True)
        best_obj = min(best_obj, float(objective(local).min()))
    return best_obj


def dense_weighted_twfe(
    Y: np.ndarray, W: np.ndarray, unit_weights: np.ndarray, time_weights: np.ndarray
) -> tuple[float, float]:
    """Weighted least squares of the saturated two-way model with a
    treatment dummy, solved on the explicit dummy design.

    Returns (treatment coefficient, attained weighted sum of squares).
    """
    n, t = Y.shape
    rows = n * t
    design = np.zeros((rows, 1 + (n - 1) + (t - 1) + 1))
    y = np.empty(rows)
    weights = np.empty(rows)
    r = 0
    for i in range(n):
        for s in range(t):
            design[r, 0] = 1.0
            if i > 0:
                design[r, i] = 1.0
            if s > 0:
                design[r, n - 1 + s] = 1.0
            design[r, -1] = 1.0 if W[i, s] else 0.0
            y[r] = Y[i, s]
            weights[r] = unit_weights[i] * time_weights[s]
            r += 1
    sw = np.sqrt(weights)
    coef, _, _, _ = np.linalg.lstsq(design * sw[:, None], y * sw, rcond=None)
    resid = y - design @ coef
    return float(coef[-1]), float(weights @ (resid * resid))


def twfe_beta_by_demeaning(
    y: np.ndarray,
    X: np.ndarray,
    unit_idx: np.ndarray,
    time_idx: np.ndarray,
    sweeps: int = 2000,
    tol: float = 1e-13,
) -> np.ndarray:
    """Covariate coefficients of an unbalanced two-way fixed-effects model,
    by alternately sweeping out unit and time means from every column."""
    n_units = int(unit_idx.max()) + 1
    n_times = int(time_idx.max()) + 1
    Z = np.column_stack([y, X]).astype(np.float64)
    for _ in range(sweeps):
        before = Z.copy()
        for k, idx, size in ((0, unit_idx, n_units), (1, time_idx, n_times)):
            sums = np.zeros((size, Z.shape[1]))
            counts = np.zeros(size)
            np.add.at(sums, idx, Z)
            np.add.at(counts, idx, 1.0)
            Z = Z - sums[idx] / counts[idx, None]
        if np.max(np.abs(Z - before)) < tol * max(1.0, np.max(np.abs(before))):
            break
    y_dm, X_dm = Z[:, 0], Z[:, 1:]
    beta, _, _, _ = np.linalg.lstsq(X_dm, y_dm, rcond=None)
    return beta


def sc_regression_objective(
    Y: np.ndarray, n_co: int, a_col: int, omega: np.ndarray
) -> float:
    """Profiled weighted sum of squares of the no-unit-effects regression
    (period effects and the treatment coefficient minimized out) at fixed
    control weights."""
    n, t = Y.shape
    n_tr = n - n_co
    u = np.concatenate([omega, np.full(n_tr, 1.0 / n_tr)])
    co_mean = omega @ Y[:n_co]
    tr_mean = Y[n_co:].mean(axis=0)
    tau = float((tr_mean[a_col:] - co_mean[a_col:]).mean())
    m = 0.5 * (co_mean + tr_mean)
    m[a_col:] -= 0.5 * tau
    ssr = 0.0
    for s in range(t):
        fitted_co = m[s]
        fitted_tr = m[s] + (tau if s >= a_col else 0.0)
        ssr += float(u[:n_co] @ (Y[:n_co, s] - fitted_co) ** 2)
        ssr += float(u[n_co:] @ (Y[n_co:, s] - fitted_tr) ** 2)
    return ssr


STANDARD_NORMAL_975 = 1.959963984540054
