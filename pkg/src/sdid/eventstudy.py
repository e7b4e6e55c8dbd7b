"""Per-period gap between treated and synthetic-control trends, relative to
the time-weighted pre-treatment baseline, with bootstrap confidence bands.

The baseline subtracts the fitted time weights' average of the pre-period
gaps, so the weighted pre-period mean of the resulting series is zero by
construction.  Bands come from cluster-resampling units of the cohort's
subpanel and re-running the whole fit, including fresh time weights, in
every replicate; the per-period standard error is the sample standard
deviation (divisor B-1) across replicates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .covariates import CovariateMode
from .errors import ResampleExhaustionError, TooFewTreatedError
from .estimator import AdoptionEstimate, MethodKind, estimate
from .inference import RngSpec, _map_replicates
from .panel import BalancedPanel, panel_from_matrices, subset_for_adoption
from .weights import SolverConfig


@dataclass(frozen=True)
class EventStudySeries:
    """Gap series with pointwise confidence bands for one adoption cohort."""

    periods: tuple[int, ...]
    adoption_period: int
    d: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    reps: int


def event_series(est: AdoptionEstimate) -> np.ndarray:
    """Per-period gap minus the time-weighted pre-period average gap."""
    a_col = est.times.index(est.adoption_period)
    baseline = float(est.time_weights.lam @ est.difference[:a_col])
    return est.difference - baseline


def event_bands(
    panel: BalancedPanel,
    adoption_period: int,
    covariates: CovariateMode | str | None = None,
    reps: int = 100,
    rng: RngSpec | None = None,
    level: float = 0.95,
    config: SolverConfig | None = None,
    threads: int = 1,
) -> EventStudySeries:
    """Event-study series for one cohort with bootstrap bands.

    The panel is restricted to that cohort plus all pure controls before
    anything is estimated, mirroring how a single-cohort analysis subsets
    its sample.
    """
    if reps < 2:
        raise ValueError("event-study bands need at least 2 replicates")
    rng = rng or RngSpec()
    sub = subset_for_adoption(panel, adoption_period)
    if sub.N_tr <= 1:
        raise TooFewTreatedError(
            "event-study bands resample units; the cohort needs more than one treated unit"
        )
    point = estimate(sub, MethodKind.SDID, covariates, config)
    d = event_series(point.adoption_estimates[0])

    n, n_co = sub.N, sub.N_co

    def one(b: int) -> np.ndarray:
        gen = rng.generator(b)
        discards = 0
        while True:
            idx = gen.integers(0, n, size=n)
            treated_rows = int(np.sum(idx >= n_co))
            if 0 < treated_rows < n:
                break
            discards += 1
            if discards > 100 * reps:
                raise ResampleExhaustionError(
                    f"replicate {b}: {discards} consecutive degenerate resamples"
                )
        resample = panel_from_matrices(
            sub.Y[idx], sub.W[idx], sub.times, X=sub.X[idx],
            covariate_names=sub.covariate_names,
        )
        res = estimate(resample, MethodKind.SDID, covariates, config)
        return event_series(res.adoption_estimates[0])

    draws = np.vstack(_map_replicates(one, reps, threads))
    se = draws.std(axis=0, ddof=1)
    z = float(norm.ppf(0.5 * (1.0 + level)))
    return EventStudySeries(
        periods=sub.times,
        adoption_period=adoption_period,
        d=d,
        ci_lower=d - z * se,
        ci_upper=d + z * se,
        reps=reps,
    )
