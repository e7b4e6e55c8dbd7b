"""Point estimation: weighted double-difference per adoption period, plus
aggregation of staggered cohorts into a single average effect on the treated.

The weighted two-way fixed-effects program with a block treatment indicator
has a closed-form solution: the treatment coefficient is the weighted double
difference of group means, and the fixed effects are weighted row/column
means of the outcome net of that coefficient.  The closed form is used
everywhere; a dense least-squares oracle enforces the equivalence in tests.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

from .covariates import CovariateFit, CovariateMode, project_out_optimized, project_out_projected
from .errors import DegenerateDesignError
from .panel import AdoptionSchedule, BalancedPanel, adoption_schedule, subset_for_adoption
from .weights import (
    NoiseScale,
    SolverConfig,
    TimeWeights,
    UnitWeights,
    noise_scale,
    solve_time_weights,
    solve_unit_weights,
    unit_regularizer,
)

if TYPE_CHECKING:
    from .inference import InferenceResult


class MethodKind(str, Enum):
    SDID = "sdid"
    DID = "did"
    SC = "sc"


@dataclass(frozen=True)
class WeightedRegressionFit:
    """Solution of the weighted two-way fixed-effects regression.

    ``alpha`` and ``beta_time`` are normalized so their first entries are
    zero; ``tau`` equals the weighted double difference of group means.
    """

    tau: float
    mu: float
    alpha: np.ndarray
    beta_time: np.ndarray


@dataclass(frozen=True)
class AdoptionEstimate:
    """One adoption cohort's effect estimate with its weights and trends.

    ``treated_series`` is the cohort's simple average outcome per period;
    ``control_series`` is the weight-averaged control outcome (the level
    intercept is not added); ``difference`` is their gap.
    """

    adoption_period: int
    tau: float
    unit_weights: UnitWeights
    time_weights: TimeWeights
    t_post: int
    adopter_count: int
    times: tuple[int, ...]
    treated_series: np.ndarray
    control_series: np.ndarray
    difference: np.ndarray

    @property
    def converged(self) -> bool:
        return self.unit_weights.converged and self.time_weights.converged


@dataclass(frozen=True)
class SdidResult:
    """Aggregate effect with its per-adoption decomposition.

    ``beta`` is None without covariates, a single CovariateFit in projected
    mode, and one CovariateFit per adoption period in optimized mode.
    """

    att: float
    adoption_estimates: tuple[AdoptionEstimate, ...]
    beta: CovariateFit | tuple[CovariateFit, ...] | None
    method: MethodKind
    schedule: AdoptionSchedule
    variance: "InferenceResult | None" = None

    @property
    def converged(self) -> bool:
        fits = self.beta if isinstance(self.beta, tuple) else (self.beta,) if self.beta else ()
        return all(e.converged for e in self.adoption_estimates) and all(
            f.converged for f in fits
        )

    def with_variance(self, variance: "InferenceResult") -> "SdidResult":
        return replace(self, variance=variance)


def _uniform_weights(n_controls: int, t_pre: int) -> tuple[UnitWeights, TimeWeights]:
    return (
        UnitWeights(omega0=0.0, omega=np.full(n_controls, 1.0 / n_controls)),
        TimeWeights(lambda0=0.0, lam=np.full(t_pre, 1.0 / t_pre)),
    )


def _check_block(panel_sub: BalancedPanel) -> int:
    if panel_sub.N_co < 1 or panel_sub.N_tr < 1:
        raise DegenerateDesignError("need at least one control and one treated unit")
    a_col = panel_sub.treated_start_col()
    if a_col < 1:
        raise DegenerateDesignError("no pre-treatment periods")
    if a_col >= panel_sub.T:
        raise DegenerateDesignError("no post-treatment periods")
    return a_col


def weighted_did(
    panel_sub: BalancedPanel, uw: UnitWeights, tw: TimeWeights
) -> WeightedRegressionFit:
    """Weighted two-way fixed-effects fit on a block-design panel.

    Unit weights apply to controls (treated units share 1/N_tr each), time
    weights to pre periods (post periods share 1/T_post each).
    """
    a_col = _check_block(panel_sub)
    n_co, n_tr, t_len = panel_sub.N_co, panel_sub.N_tr, panel_sub.T
    t_post = t_len - a_col
    omega, lam = np.asarray(uw.omega), np.asarray(tw.lam)
    if omega.shape != (n_co,):
        raise ValueError(f"unit weights have length {omega.shape}, panel has {n_co} controls")
    if lam.shape != (a_col,):
        raise ValueError(f"time weights have length {lam.shape}, panel has {a_col} pre periods")

    Y = panel_sub.Y
    tr_post = float(Y[n_co:, a_col:].mean())
    tr_pre = float((Y[n_co:, :a_col] @ lam).mean())
    co_post = float(omega @ Y[:n_co, a_col:].mean(axis=1))
    co_pre = float(omega @ (Y[:n_co, :a_col] @ lam))
    tau = (tr_post - tr_pre) - (co_post - co_pre)

    u = np.concatenate([omega, np.full(n_tr, 1.0 / n_tr)])
    v = np.concatenate([lam, np.full(t_post, 1.0 / t_post)])
    Z = Y - tau * panel_sub.W
    row_means = (Z @ v) / v.sum()
    col_means = (u @ Z) / u.sum()
    grand = float(u @ Z @ v / (u.sum() * v.sum()))
    alpha = row_means - grand
    beta_time = col_means - grand
    mu = grand + alpha[0] + beta_time[0]
    alpha = alpha - alpha[0]
    beta_time = beta_time - beta_time[0]
    return WeightedRegressionFit(tau=tau, mu=mu, alpha=alpha, beta_time=beta_time)


def _sc_tau(panel_sub: BalancedPanel, omega: np.ndarray, a_col: int) -> float:
    # the per-period effects regression without unit effects profiles time
    # effects out of both groups, leaving the mean post-period gap
    Y = panel_sub.Y
    gap = Y[panel_sub.N_co :, a_col:].mean(axis=0) - omega @ Y[: panel_sub.N_co, a_col:]
    return float(gap.mean())


def estimate_block(
    panel_sub: BalancedPanel,
    method: MethodKind | str = MethodKind.SDID,
    config: SolverConfig | None = None,
) -> AdoptionEstimate:
    """Fit one block-design subproblem with the requested method.

    sdid solves both weight programs; did uses uniform weights; sc solves
    the unit program without a level intercept, keeps uniform pre-period
    time weights, and drops unit fixed effects from the effect regression.
    """
    method = MethodKind(method)
    a_col = _check_block(panel_sub)
    n_co = panel_sub.N_co
    t_post = panel_sub.T - a_col

    if method is MethodKind.SDID:
        scale = noise_scale(panel_sub)
        zeta = unit_regularizer(panel_sub.N_tr, t_post, scale)
        uw = solve_unit_weights(panel_sub, zeta, config)
        tw = solve_time_weights(panel_sub, scale, config)
        tau = weighted_did(panel_sub, uw, tw).tau
    elif method is MethodKind.DID:
        uw, tw = _uniform_weights(n_co, a_col)
        tau = weighted_did(panel_sub, uw, tw).tau
    else:
        scale = noise_scale(panel_sub) if a_col >= 2 else NoiseScale(0.0)
        zeta = unit_regularizer(panel_sub.N_tr, t_post, scale)
        uw = solve_unit_weights(panel_sub, zeta, config, intercept=False)
        tw = TimeWeights(lambda0=0.0, lam=np.full(a_col, 1.0 / a_col))
        tau = _sc_tau(panel_sub, uw.omega, a_col)

    Y = panel_sub.Y
    treated_series = Y[n_co:].mean(axis=0)
    control_series = uw.omega @ Y[:n_co]
    return AdoptionEstimate(
        adoption_period=panel_sub.times[a_col],
        tau=tau,
        unit_weights=uw,
        time_weights=tw,
        t_post=t_post,
        adopter_count=panel_sub.N_tr,
        times=panel_sub.times,
        treated_series=treated_series,
        control_series=control_series,
        difference=treated_series - control_series,
    )


def estimate(
    panel: BalancedPanel,
    method: MethodKind | str = MethodKind.SDID,
    covariates: CovariateMode | str | None = None,
    config: SolverConfig | None = None,
) -> SdidResult:
    """Estimate the average effect on the treated across adoption periods.

    Each distinct adoption period forms a block subproblem (all pure
    controls plus that cohort); cohort estimates are averaged with weights
    proportional to each cohort's treated post-treatment observations.
    """
    method = MethodKind(method)
    if isinstance(covariates, str):
        covariates = CovariateMode(kind=covariates)
    sched = adoption_schedule(panel)
    if not sched.periods:
        raise DegenerateDesignError("panel has no treated units")

    beta: CovariateFit | tuple[CovariateFit, ...] | None = None
    work = panel
    if panel.K > 0:
        if covariates is None:
            raise ValueError(
                "panel carries covariates; pass covariates='optimized' or 'projected'"
            )
        if covariates.kind == "projected":
            work, beta = project_out_projected(panel)

    estimates = []
    per_adoption_beta = []
    for period in sched.periods:
        sub = subset_for_adoption(work, period)
        if panel.K > 0 and covariates is not None and covariates.kind == "optimized":
            sub, fit = project_out_optimized(sub, config, covariates.standardize)
            per_adoption_beta.append(fit)
        estimates.append(estimate_block(sub, method, config))
    if per_adoption_beta:
        beta = tuple(per_adoption_beta)

    att = float(
        sum(w * e.tau for w, e in zip(sched.weights, estimates))
    )
    return SdidResult(
        att=att,
        adoption_estimates=tuple(estimates),
        beta=beta,
        method=method,
        schedule=sched,
    )
