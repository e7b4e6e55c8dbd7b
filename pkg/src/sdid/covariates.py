"""Covariate adjustment applied before weight fitting.

Two modes are supported.  "projected" estimates covariate coefficients once,
by two-way fixed-effects OLS on the untreated observations only, and
residualizes every cell with that single coefficient vector.  "optimized"
estimates the coefficients jointly with the unit and time weights inside each
adoption-period subproblem, by alternating closed-form least squares for the
coefficients with conditional-gradient weight updates on a shared objective.
In both modes the outcome handed to the estimator is Y - X @ beta.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceWarning,
    InsufficientUntreatedObservationsError,
    RankDeficientError,
)
from .panel import BalancedPanel
from .weights import (
    SolverConfig,
    noise_scale,
    solve_simplex_ridge,
    time_regularizer,
    unit_regularizer,
)

_MODES = ("optimized", "projected")


@dataclass(frozen=True)
class CovariateMode:
    """How covariate coefficients are estimated.

    ``standardize`` applies only to the optimized mode, where covariates are
    turned into Z-scores before optimization so that high-variance columns
    cannot destabilize the stopping rule; reported coefficients are always on
    the original scale.
    """

    kind: str = "optimized"
    standardize: bool = True

    def __post_init__(self):
        if self.kind not in _MODES:
            raise ValueError(f"covariate mode must be one of {_MODES}, got {self.kind!r}")


@dataclass(frozen=True)
class CovariateFit:
    """Estimated coefficients and the standardization used, if any."""

    mode: str
    beta: np.ndarray
    names: tuple[str, ...] = ()
    standardization: tuple[np.ndarray, np.ndarray] | None = None
    converged: bool = True


def _covariate_names(panel: BalancedPanel) -> tuple[str, ...]:
    if panel.covariate_names:
        return panel.covariate_names
    return tuple(f"x{j}" for j in range(panel.K))


def project_out_projected(panel: BalancedPanel) -> tuple[BalancedPanel, CovariateFit]:
    """Residualize outcomes with coefficients from a two-way fixed-effects
    regression fit on untreated observations only.

    The untreated subsample is unbalanced (treated units contribute only
    their pre-adoption periods), so the regression is solved as one dense
    least-squares problem on covariates plus unit and time dummies.
    """
    if panel.K < 1:
        raise ValueError("panel has no covariates")
    n, t_len, k = panel.N, panel.T, panel.K
    mask = ~panel.W
    n_obs = int(mask.sum())
    params = n + t_len + k - 1
    dof = n_obs - params
    if dof <= 0:
        raise InsufficientUntreatedObservationsError(
            f"{n_obs} untreated observations cannot identify {params} parameters"
        )
    if dof < 10:
        warnings.warn(
            f"only {dof} residual degrees of freedom in the untreated subsample",
            ConvergenceWarning,
            stacklevel=2,
        )

    rows = np.nonzero(mask.ravel())[0]
    unit_idx, time_idx = np.divmod(rows, t_len)
    design = np.zeros((len(rows), 1 + (n - 1) + (t_len - 1) + k))
    design[:, 0] = 1.0
    keep = unit_idx > 0
    design[np.nonzero(keep)[0], unit_idx[keep]] = 1.0
    keep = time_idx > 0
    design[np.nonzero(keep)[0], n - 1 + time_idx[keep]] = 1.0
    design[:, n + t_len - 1 :] = panel.X.reshape(n * t_len, k)[rows]
    y = panel.Y.ravel()[rows]

    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < design.shape[1]:
        raise RankDeficientError(
            "covariates are collinear with each other or with unit/time effects"
        )
    beta = coef[n + t_len - 1 :]

    resid = panel.Y - panel.X @ beta
    fit = CovariateFit(mode="projected", beta=beta, names=_covariate_names(panel))
    return panel.with_outcome(resid), fit


def _standardize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    flat = X.reshape(-1, X.shape[2])
    means = flat.mean(axis=0)
    sds = flat.std(axis=0)
    if np.any(sds == 0.0):
        bad = [int(j) for j in np.nonzero(sds == 0.0)[0]]
        raise RankDeficientError(
            "covariates constant within this subproblem", ids=bad
        )
    return (X - means) / sds, means, sds


def project_out_optimized(
    panel_sub: BalancedPanel,
    config: SolverConfig | None = None,
    standardize: bool = True,
) -> tuple[BalancedPanel, CovariateFit]:
    """Estimate coefficients jointly with the weights of one block-design
    subproblem, then residualize its outcomes.

    The shared objective is the sum of the unit-weight and time-weight
    program objectives evaluated on Y - X @ beta; ridge strengths are fixed
    from the raw outcomes.  Coefficient updates solve the stacked least
    squares exactly (jointly with both intercepts), weight updates run the
    simplex solver, and the loop stops when the relative decrease of the
    shared objective falls below the solver tolerance.
    """
    if panel_sub.K < 1:
        raise ValueError("panel has no covariates")
    config = config or SolverConfig()
    a_col = panel_sub.treated_start_col()
    n_co, n_tr = panel_sub.N_co, panel_sub.N_tr
    t_pre, t_post = a_col, panel_sub.T - a_col
    k = panel_sub.K

    Xs = panel_sub.X
    means = sds = None
    if standardize:
        Xs, means, sds = _standardize(panel_sub.X)

    scale = noise_scale(panel_sub)
    zeta_u = unit_regularizer(n_tr, t_post, scale)
    zeta_t = time_regularizer(scale)

    Y = panel_sub.Y
    # unit program pieces: rows are pre periods
    u_target_x = Xs[:n_co, :a_col]                       # (n_co, t_pre, k)
    u_treated_x = Xs[n_co:, :a_col].mean(axis=0)         # (t_pre, k)
    # time program pieces: rows are controls
    t_post_x = Xs[:n_co, a_col:].mean(axis=1)            # (n_co, k)

    beta = np.zeros(k)
    prev = np.inf
    converged = False
    omega = np.full(n_co, 1.0 / n_co)
    lam = np.full(t_pre, 1.0 / t_pre)
    omega0 = lambda0 = 0.0
    rank_checked = False

    for outer in range(100):
        R = Y - Xs @ beta
        warm_u = None if outer == 0 else omega
        warm_t = None if outer == 0 else lam
        ufit = solve_simplex_ridge(
            R[:n_co, :a_col].T, R[n_co:, :a_col].mean(axis=0), zeta_u, True, config,
            w_init=warm_u,
        )
        tfit = solve_simplex_ridge(
            R[:n_co, :a_col], R[:n_co, a_col:].mean(axis=1), zeta_t, True, config,
            w_init=warm_t,
        )
        omega, omega0 = ufit.weights, ufit.intercept
        lam, lambda0 = tfit.weights, tfit.intercept

        # coefficient step: residuals of both programs are linear in
        # (beta, omega0, lambda0); solve the stacked system exactly.
        m_unit = np.einsum("i,itk->tk", omega, u_target_x) - u_treated_x
        c_unit = omega @ Y[:n_co, :a_col] - Y[n_co:, :a_col].mean(axis=0)
        m_time = np.einsum("itk,t->ik", Xs[:n_co, :a_col], lam) - t_post_x
        c_time = Y[:n_co, :a_col] @ lam - Y[:n_co, a_col:].mean(axis=1)

        design = np.zeros((t_pre + n_co, k + 2))
        design[:t_pre, :k] = m_unit
        design[:t_pre, k] = -1.0
        design[t_pre:, :k] = m_time
        design[t_pre:, k + 1] = -1.0
        rhs = np.concatenate([c_unit, c_time])
        if not rank_checked:
            centered = np.vstack([m_unit - m_unit.mean(axis=0), m_time - m_time.mean(axis=0)])
            if np.linalg.matrix_rank(centered, tol=1e-9 * max(1.0, float(np.abs(centered).max()))) < k:
                raise RankDeficientError(
                    "covariates are collinear with unit/time structure in this subproblem"
                )
            rank_checked = True
        sol = np.linalg.lstsq(design, rhs, rcond=None)[0]
        beta = sol[:k]
        omega0, lambda0 = float(sol[k]), float(sol[k + 1])

        R = Y - Xs @ beta
        u_res = omega0 + omega @ R[:n_co, :a_col] - R[n_co:, :a_col].mean(axis=0)
        t_res = lambda0 + R[:n_co, :a_col] @ lam - R[:n_co, a_col:].mean(axis=1)
        joint = (
            float(u_res @ u_res)
            + zeta_u * zeta_u * t_pre * float(omega @ omega)
            + float(t_res @ t_res)
            + zeta_t * zeta_t * n_co * float(lam @ lam)
        )
        if prev - joint <= config.relative_decrease_tolerance * max(abs(prev), 1e-300):
            converged = True
            break
        prev = joint
    if not converged:
        warnings.warn(
            "joint covariate/weight optimization hit its iteration cap",
            ConvergenceWarning,
            stacklevel=2,
        )

    beta_orig = beta / sds if standardize else beta
    resid = panel_sub.Y - panel_sub.X @ beta_orig
    fit = CovariateFit(
        mode="optimized",
        beta=beta_orig,
        names=_covariate_names(panel_sub),
        standardization=(means, sds) if standardize else None,
        converged=converged,
    )
    return panel_sub.with_outcome(resid), fit
