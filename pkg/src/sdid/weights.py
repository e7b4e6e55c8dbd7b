"""Unit- and time-weight programs solved by a conditional-gradient method.

Both programs are ridge-penalized least squares over the probability simplex:

  unit weights   minimize over (w0, w):  sum_t (w0 + sum_i w_i Y_it - ybar_t)^2
                 + zeta^2 * T_pre * ||w||^2, columns = control pre-period series;

  time weights   minimize over (l0, l):  sum_i (l0 + sum_t l_t Y_it - ypost_i)^2
                 + zeta^2 * N_co * ||l||^2, columns = pre-period cross sections.

The shared kernel uses pairwise Frank-Wolfe steps (mass moves from the worst
in-support vertex to the best vertex, with exact line search), which reaches
the optimum of these quadratics to certificate accuracy: iteration stops when
the Frank-Wolfe duality gap falls below ``relative_decrease_tolerance`` times
the initial objective.  Plain toward-vertex steps zig-zag near low-dimensional
faces and stall around 1e-3 suboptimality, which is not acceptable here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDesignError, TooFewPrePeriodsError
from .panel import BalancedPanel


@dataclass(frozen=True)
class NoiseScale:
    """Standard deviation of first-differenced control pre-period outcomes."""

    sigma_hat: float


@dataclass(frozen=True)
class Regularizer:
    """Ridge strengths for the two weight programs."""

    zeta_unit: float
    zeta_time: float


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rule for the simplex solver.

    ``relative_decrease_tolerance`` bounds the Frank-Wolfe gap relative to
    the starting objective; ``ridge_floor`` (times the squared data scale)
    stands in for the ridge term when the noise scale is exactly zero, so a
    flat optimal face still has a unique, most-uniform solution.
    """

    max_iterations: int = 10_000
    relative_decrease_tolerance: float = 1e-5
    ridge_floor: float = 1e-12

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.relative_decrease_tolerance <= 0 or self.ridge_floor <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class SimplexFit:
    """Solution of one simplex-ridge program."""

    intercept: float
    weights: np.ndarray
    objective: float
    iterations: int
    converged: bool
    trace: tuple[float, ...] | None = None


@dataclass(frozen=True)
class UnitWeights:
    """Simplex weights over control units plus an unpenalized level shift."""

    omega0: float
    omega: np.ndarray
    converged: bool = True


@dataclass(frozen=True)
class TimeWeights:
    """Simplex weights over pre-treatment periods plus a level shift."""

    lambda0: float
    lam: np.ndarray
    converged: bool = True


def noise_scale(panel_sub: BalancedPanel) -> NoiseScale:
    """Noise scale from first differences of control pre-period outcomes.

    The variance normalizer is N_co * (T_pre - 1), the number of first
    differences, so this is the population variance of the pooled
    differences.
    """
    a_col = panel_sub.treated_start_col()
    if a_col < 2:
        raise TooFewPrePeriodsError(
            f"need at least 2 pre-treatment periods to estimate the noise scale, got {a_col}"
        )
    pre = panel_sub.Y[: panel_sub.N_co, :a_col]
    diffs = np.diff(pre, axis=1)
    sigma_sq = float(np.mean((diffs - diffs.mean()) ** 2))
    return NoiseScale(sigma_hat=float(np.sqrt(sigma_sq)))


def unit_regularizer(n_treated: int, t_post: int, scale: NoiseScale) -> float:
    """Unit-weight ridge strength: (N_tr * T_post)^(1/4) * sigma_hat."""
    if n_treated < 1 or t_post < 1:
        raise ValueError("n_treated and t_post must be >= 1")
    return float((n_treated * t_post) ** 0.25 * scale.sigma_hat)


def time_regularizer(scale: NoiseScale) -> float:
    """Time-weight ridge strength: a 1e-6 * sigma_hat uniqueness term."""
    return 1e-6 * scale.sigma_hat


def regularizer(n_treated: int, t_post: int, scale: NoiseScale) -> Regularizer:
    return Regularizer(
        zeta_unit=unit_regularizer(n_treated, t_post, scale),
        zeta_time=time_regularizer(scale),
    )


def solve_simplex_ridge(
    columns: np.ndarray,
    target: np.ndarray,
    penalty: float,
    intercept: bool,
    config: SolverConfig | None = None,
    collect_trace: bool = False,
    w_init: np.ndarray | None = None,
) -> SimplexFit:
    """Minimize ||w0 + columns @ w - target||^2 + penalty^2 * rows * ||w||^2
    over the probability simplex, with w0 free (or fixed at 0).

    Ties in the vertex selection break toward the lowest index, so results
    are deterministic across platforms.
    """
    config = config or SolverConfig()
    A = np.asarray(columns, dtype=np.float64)
    b = np.asarray(target, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError("columns must be a nonempty 2-d array")
    if b.shape != (A.shape[0],):
        raise ValueError("target length must match the number of rows")
    if penalty < 0:
        raise ValueError("penalty must be >= 0")
    rows, m = A.shape

    if intercept:
        Ad = A - A.mean(axis=0)
        bd = b - b.mean()
    else:
        Ad, bd = A, b

    ridge = penalty * penalty * rows
    if ridge == 0.0:
        data_scale = max(float(np.abs(A).max()), float(np.abs(b).max()), 1.0)
        ridge = config.ridge_floor * data_scale * data_scale

    G = Ad.T @ Ad + ridge * np.eye(m)
    h = Ad.T @ bd
    const = float(bd @ bd)

    if w_init is None:
        w = np.full(m, 1.0 / m)
    else:
        w = np.asarray(w_init, dtype=np.float64).copy()
        if w.shape != (m,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-8:
            raise ValueError("w_init must be a point on the probability simplex")
        w /= w.sum()
    Gw = G @ w
    obj = float(w @ Gw - 2.0 * (h @ w) + const)
    gap_tol = config.relative_decrease_tolerance * max(obj, np.finfo(np.float64).tiny)
    trace = [obj] if collect_trace else None

    converged = False
    iterations = 0
    stalled = 0
    for iterations in range(1, config.max_iterations + 1):
        g = 2.0 * (Gw - h)
        j = int(np.argmin(g))
        gap = float(g @ w - g[j])
        if gap <= gap_tol:
            converged = True
            break
        support = np.nonzero(w > 0.0)[0]
        away = int(support[np.argmax(g[support])])
        if away == j:
            converged = True
            break
        step_max = w[away]
        curvature = 2.0 * (G[j, j] + G[away, away] - 2.0 * G[j, away])
        descent = g[j] - g[away]
        step = step_max if curvature <= 0.0 else min(step_max, -descent / curvature)
        if step <= 0.0:
            converged = True
            break
        w[j] += step
        w[away] -= step
        if w[away] < 1e-16:
            w[away] = 0.0
            w /= w.sum()
        Gw = G @ w
        prev = obj
        obj = float(w @ Gw - 2.0 * (h @ w) + const)
        if collect_trace:
            trace.append(obj)
        # objective changes at float resolution mean no further certificate
        # improvement is possible; treat a run of them as converged
        if prev - obj <= 1e-15 * max(abs(prev), np.finfo(np.float64).tiny):
            stalled += 1
            if stalled >= 32:
                converged = True
                break
        else:
            stalled = 0
    else:
        iterations = config.max_iterations

    w0 = float(np.mean(b - A @ w)) if intercept else 0.0
    resid = w0 + A @ w - b
    attained = float(resid @ resid + ridge * (w @ w))
    return SimplexFit(
        intercept=w0,
        weights=w,
        objective=attained,
        iterations=iterations,
        converged=converged,
        trace=tuple(trace) if collect_trace else None,
    )


def solve_unit_weights(
    panel_sub: BalancedPanel,
    zeta: float,
    config: SolverConfig | None = None,
    intercept: bool = True,
) -> UnitWeights:
    """Match the treated units' average pre-period series with a weighted
    combination of control series; ``intercept=False`` forces level matching
    (the synthetic-control variant)."""
    a_col = panel_sub.treated_start_col()
    min_pre = 2 if intercept else 1
    if a_col < min_pre:
        raise TooFewPrePeriodsError(
            f"unit weights need at least {min_pre} pre-treatment periods, got {a_col}"
        )
    Y = panel_sub.Y
    columns = Y[: panel_sub.N_co, :a_col].T
    target = Y[panel_sub.N_co :, :a_col].mean(axis=0)
    fit = solve_simplex_ridge(columns, target, zeta, intercept, config)
    return UnitWeights(omega0=fit.intercept, omega=fit.weights, converged=fit.converged)


def solve_time_weights(
    panel_sub: BalancedPanel,
    scale: NoiseScale,
    config: SolverConfig | None = None,
) -> TimeWeights:
    """Match each control's post-period average with a weighted combination
    of its pre-period outcomes."""
    a_col = panel_sub.treated_start_col()
    if a_col < 2:
        raise TooFewPrePeriodsError(
            f"time weights need at least 2 pre-treatment periods, got {a_col}"
        )
    if a_col >= panel_sub.T:
        raise DegenerateDesignError("time weights need at least 1 post-treatment period")
    Y = panel_sub.Y
    columns = Y[: panel_sub.N_co, :a_col]
    target = Y[: panel_sub.N_co, a_col:].mean(axis=1)
    fit = solve_simplex_ridge(columns, target, time_regularizer(scale), True, config)
    return TimeWeights(lambda0=fit.intercept, lam=fit.weights, converged=fit.converged)
