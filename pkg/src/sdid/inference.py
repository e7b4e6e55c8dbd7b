"""Variance estimation for the aggregate treatment effect.

Three procedures: a clustered bootstrap over units with full re-estimation
per resample, a leave-one-unit-out jackknife that holds the fitted weights
fixed, and placebo permutation of the treatment structure onto control
units.  Replicates draw from per-index random streams, so results are
identical for a given seed regardless of thread count or execution order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.stats import norm

from .covariates import CovariateMode
from .errors import (
    NotEnoughControlsError,
    ResampleExhaustionError,
    SingleTreatedUnitError,
    TooFewTreatedError,
)
from .estimator import MethodKind, SdidResult, estimate
from .panel import BalancedPanel, adoption_schedule, panel_from_matrices, subset_for_adoption
from .weights import SolverConfig


class VarianceMethod(str, Enum):
    BOOTSTRAP = "bootstrap"
    JACKKNIFE = "jackknife"
    PLACEBO = "placebo"
    NONE = "noinference"


@dataclass(frozen=True)
class RngSpec:
    """Seed plus a rule deriving one independent stream per replicate.

    Streams depend only on (seed, replicate index), never on execution
    order, which keeps resampling inference deterministic under threading.
    """

    seed: int = 0

    def generator(self, replicate_index: int) -> np.random.Generator:
        entropy = self.seed % (2**63)
        return np.random.default_rng(
            np.random.SeedSequence(entropy=entropy, spawn_key=(replicate_index,))
        )


@dataclass(frozen=True)
class InferenceResult:
    """Variance, standard error, and normal-approximation interval."""

    method: VarianceMethod
    variance: float
    se: float
    reps_used: int
    reps_discarded: int
    ci_level: float
    ci: tuple[float, float]
    per_adoption: tuple[tuple[int, float | None], ...] | None = None


def confidence_interval(point: float, variance: float, level: float) -> tuple[float, float]:
    """point +/- z * sqrt(variance) with z the normal quantile at (1+level)/2."""
    if variance < 0:
        raise ValueError("variance must be >= 0")
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    z = float(norm.ppf(0.5 * (1.0 + level)))
    half = z * float(np.sqrt(variance))
    return (point - half, point + half)


def replicate_variance(values) -> float:
    """Population variance (1/B) of replicate estimates."""
    arr = np.asarray(values, dtype=np.float64)
    return float(np.mean((arr - arr.mean()) ** 2))


def leave_one_out_variance(values, center: float) -> float:
    """(N-1)/N times the sum of squared deviations from the full-sample
    estimate."""
    arr = np.asarray(values, dtype=np.float64)
    n = arr.size
    return float((n - 1) / n * np.sum((arr - center) ** 2))


def _map_replicates(fn, reps: int, threads: int) -> list:
    if threads <= 1:
        return [fn(b) for b in range(reps)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(reps)))


def _per_adoption_variances(
    periods, taus_by_replicate
) -> tuple[tuple[int, float | None], ...]:
    out = []
    for a in periods:
        vals = [taus[a] for taus in taus_by_replicate if a in taus]
        out.append((a, replicate_variance(vals) if len(vals) >= 2 else None))
    return tuple(out)


def bootstrap_variance(
    panel: BalancedPanel,
    method: MethodKind | str = MethodKind.SDID,
    covariates: CovariateMode | str | None = None,
    reps: int = 50,
    rng: RngSpec | None = None,
    config: SolverConfig | None = None,
    ci_level: float = 0.95,
    point_estimate: float | None = None,
    threads: int = 1,
) -> InferenceResult:
    """Clustered bootstrap over units with full re-estimation per resample.

    Resamples containing only treated or only control rows are discarded and
    redrawn from the same replicate stream.
    """
    if panel.N_tr <= 1:
        raise TooFewTreatedError(
            "bootstrap inference needs more than one treated unit; use placebo"
        )
    if reps < 2:
        raise ValueError("bootstrap needs at least 2 replicates")
    rng = rng or RngSpec()
    sched = adoption_schedule(panel)
    n, n_co = panel.N, panel.N_co

    def one(b: int):
        gen = rng.generator(b)
        discards = 0
        while True:
            idx = gen.integers(0, n, size=n)
            n_treated_rows = int(np.sum(idx >= n_co))
            if 0 < n_treated_rows < n:
                break
            discards += 1
            if discards > 100 * reps:
                raise ResampleExhaustionError(
                    f"replicate {b}: {discards} consecutive all-treated/all-control resamples"
                )
        resample = panel_from_matrices(
            panel.Y[idx],
            panel.W[idx],
            panel.times,
            X=panel.X[idx],
            covariate_names=panel.covariate_names,
        )
        res = estimate(resample, method, covariates, config)
        taus = {e.adoption_period: e.tau for e in res.adoption_estimates}
        return res.att, taus, discards

    results = _map_replicates(one, reps, threads)
    atts = [r[0] for r in results]
    variance = replicate_variance(atts)
    if point_estimate is None:
        point_estimate = estimate(panel, method, covariates, config).att
    return InferenceResult(
        method=VarianceMethod.BOOTSTRAP,
        variance=variance,
        se=float(np.sqrt(variance)),
        reps_used=reps,
        reps_discarded=sum(r[2] for r in results),
        ci_level=ci_level,
        ci=confidence_interval(point_estimate, variance, ci_level),
        per_adoption=_per_adoption_variances(sched.periods, [r[1] for r in results]),
    )


def placebo_variance(
    panel: BalancedPanel,
    method: MethodKind | str = MethodKind.SDID,
    covariates: CovariateMode | str | None = None,
    reps: int = 50,
    rng: RngSpec | None = None,
    config: SolverConfig | None = None,
    ci_level: float = 0.95,
    point_estimate: float | None = None,
    threads: int = 1,
) -> InferenceResult:
    """Permutation inference: reassign the observed adoption structure to
    sampled control units and re-estimate on controls only.

    Each replicate draws the placebo recipients without replacement and maps
    the sorted multiset of true adoption periods onto them in sorted order.
    """
    n_co, n_tr = panel.N_co, panel.N_tr
    if n_co <= n_tr:
        raise NotEnoughControlsError(
            f"placebo inference needs more controls ({n_co}) than treated units ({n_tr})"
        )
    if reps < 2:
        raise ValueError("placebo needs at least 2 replicates")
    rng = rng or RngSpec()
    sched = adoption_schedule(panel)
    adoption_multiset = sorted(
        a for a, count in zip(sched.periods, sched.adopter_counts) for _ in range(count)
    )
    cols = [panel.times.index(a) for a in adoption_multiset]
    Y_co = panel.Y[:n_co]
    X_co = panel.X[:n_co]
    labels = panel.units[:n_co]

    def one(b: int):
        gen = rng.generator(b)
        chosen = np.sort(gen.choice(n_co, size=n_tr, replace=False))
        W_placebo = np.zeros((n_co, panel.T), dtype=bool)
        for row, col in zip(chosen, cols):
            W_placebo[row, col:] = True
        resample = panel_from_matrices(
            Y_co,
            W_placebo,
            panel.times,
            units=labels,
            X=X_co,
            covariate_names=panel.covariate_names,
        )
        res = estimate(resample, method, covariates, config)
        return res.att, {e.adoption_period: e.tau for e in res.adoption_estimates}

    results = _map_replicates(one, reps, threads)
    atts = [r[0] for r in results]
    variance = replicate_variance(atts)
    if point_estimate is None:
        point_estimate = estimate(panel, method, covariates, config).att
    return InferenceResult(
        method=VarianceMethod.PLACEBO,
        variance=variance,
        se=float(np.sqrt(variance)),
        reps_used=reps,
        reps_discarded=0,
        ci_level=ci_level,
        ci=confidence_interval(point_estimate, variance, ci_level),
        per_adoption=_per_adoption_variances(sched.periods, [r[1] for r in results]),
    )


def jackknife_variance(
    panel: BalancedPanel,
    fitted: SdidResult,
    ci_level: float = 0.95,
) -> InferenceResult:
    """Leave-one-unit-out variance holding the fitted weights fixed.

    Deleting a control renormalizes the remaining unit weights to sum to
    one; deleting a treated unit re-averages its cohort over the remaining
    adopters and re-weights cohorts by their reduced size.  Requires at
    least two treated units in every adoption period.
    """
    sched = fitted.schedule
    thin = [a for a, n_a in zip(sched.periods, sched.adopter_counts) if n_a < 2]
    if thin:
        raise SingleTreatedUnitError(
            f"jackknife undefined: adoption period(s) {thin} have a single treated unit",
            ids=thin,
        )
    if panel.N_co < 2:
        raise NotEnoughControlsError("jackknife needs at least two control units")

    n, n_co = panel.N, panel.N_co
    sc_fit = fitted.method is MethodKind.SC
    cohorts = []
    for est in fitted.adoption_estimates:
        sub = subset_for_adoption(panel, est.adoption_period)
        Yr = sub.Y
        if fitted.beta is not None:
            beta_fit = fitted.beta
            if isinstance(beta_fit, tuple):
                beta_fit = beta_fit[len(cohorts)]
            Yr = sub.Y - sub.X @ beta_fit.beta
        a_col = sub.treated_start_col()
        lam = est.time_weights.lam
        omega = est.unit_weights.omega
        if sc_fit:
            # the no-unit-effects regression profiles to the post-period
            # mean gap; pre periods enter only through the fixed weights
            co_gap = Yr[:n_co, a_col:].mean(axis=1)
            tr_gap = Yr[n_co:, a_col:].mean(axis=1)
        else:
            co_gap = Yr[:n_co, a_col:].mean(axis=1) - Yr[:n_co, :a_col] @ lam
            tr_gap = Yr[n_co:, a_col:].mean(axis=1) - Yr[n_co:, :a_col] @ lam
        treated_units = sub.units[n_co:]
        cohorts.append(
            {
                "period": est.adoption_period,
                "t_post": est.t_post,
                "omega": omega,
                "co_gap": co_gap,
                "tr_gap": tr_gap,
                "treated_pos": {u: q for q, u in enumerate(treated_units)},
                "tau": float(tr_gap.mean() - omega @ co_gap),
                "n_tr": len(treated_units),
            }
        )

    def cohort_tau(c, drop_control: int | None = None, drop_treated: str | None = None):
        omega, co_gap, tr_gap = c["omega"], c["co_gap"], c["tr_gap"]
        if drop_control is not None:
            keep = np.arange(n_co) != drop_control
            rest = omega[keep]
            total = rest.sum()
            if total > 1e-12:
                rest = rest / total
            else:
                rest = np.full(rest.size, 1.0 / rest.size)
            return float(tr_gap.mean() - rest @ co_gap[keep])
        if drop_treated is not None:
            q = c["treated_pos"][drop_treated]
            keep = np.arange(c["n_tr"]) != q
            return float(tr_gap[keep].mean() - omega @ co_gap)
        return c["tau"]

    def aggregate(taus, counts):
        total = sum(
            cnt * c["t_post"] for cnt, c in zip(counts, cohorts) if cnt > 0
        )
        return sum(
            cnt * c["t_post"] / total * tau
            for cnt, tau, c in zip(counts, taus, cohorts)
            if cnt > 0
        )

    base_counts = [c["n_tr"] for c in cohorts]
    loo_atts = []
    loo_taus = []
    for i, unit in enumerate(panel.units):
        if i < n_co:
            taus = [cohort_tau(c, drop_control=i) for c in cohorts]
            counts = base_counts
        else:
            taus = []
            counts = []
            for c in cohorts:
                if unit in c["treated_pos"]:
                    taus.append(cohort_tau(c, drop_treated=unit))
                    counts.append(c["n_tr"] - 1)
                else:
                    taus.append(c["tau"])
                    counts.append(c["n_tr"])
        loo_atts.append(aggregate(taus, counts))
        loo_taus.append(taus)

    variance = leave_one_out_variance(loo_atts, fitted.att)
    per_adoption = tuple(
        (
            c["period"],
            leave_one_out_variance([taus[j] for taus in loo_taus], est.tau),
        )
        for j, (c, est) in enumerate(zip(cohorts, fitted.adoption_estimates))
    )
    return InferenceResult(
        method=VarianceMethod.JACKKNIFE,
        variance=variance,
        se=float(np.sqrt(variance)),
        reps_used=n,
        reps_discarded=0,
        ci_level=ci_level,
        ci=confidence_interval(fitted.att, variance, ci_level),
        per_adoption=per_adoption,
    )
