"""Synthetic difference-in-differences estimation for balanced panels.

Core entry points:

- :func:`build_panel` validates long-format records into a
  :class:`BalancedPanel`;
- :func:`estimate` produces point estimates (synthetic DID, plain DID, or
  synthetic control) across one or many adoption periods;
- :func:`bootstrap_variance`, :func:`jackknife_variance`, and
  :func:`placebo_variance` quantify uncertainty;
- :func:`event_series` / :func:`event_bands` build event-study figures'
  data;
- :mod:`sdid.cli` wraps everything as a CSV-in/JSON-out command.
"""

from .covariates import (
    CovariateFit,
    CovariateMode,
    project_out_optimized,
    project_out_projected,
)
from .errors import ConvergenceWarning, SdidError
from .estimator import (
    AdoptionEstimate,
    MethodKind,
    SdidResult,
    WeightedRegressionFit,
    estimate,
    estimate_block,
    weighted_did,
)
from .eventstudy import EventStudySeries, event_bands, event_series
from .inference import (
    InferenceResult,
    RngSpec,
    VarianceMethod,
    bootstrap_variance,
    confidence_interval,
    jackknife_variance,
    placebo_variance,
)
from .panel import (
    AdoptionSchedule,
    BalancedPanel,
    ColumnSpec,
    PanelRecord,
    ValidationReport,
    adoption_schedule,
    build_panel,
    panel_from_matrices,
    subset_for_adoption,
    validate_records,
)
from .weights import (
    NoiseScale,
    Regularizer,
    SimplexFit,
    SolverConfig,
    TimeWeights,
    UnitWeights,
    noise_scale,
    regularizer,
    solve_simplex_ridge,
    solve_time_weights,
    solve_unit_weights,
    time_regularizer,
    unit_regularizer,
)

__version__ = "0.1.0"

__all__ = [
    "AdoptionEstimate",
    "AdoptionSchedule",
    "BalancedPanel",
    "ColumnSpec",
    "ConvergenceWarning",
    "CovariateFit",
    "CovariateMode",
    "EventStudySeries",
    "InferenceResult",
    "MethodKind",
    "NoiseScale",
    "PanelRecord",
    "Regularizer",
    "RngSpec",
    "SdidError",
    "SdidResult",
    "SimplexFit",
    "SolverConfig",
    "TimeWeights",
    "UnitWeights",
    "ValidationReport",
    "VarianceMethod",
    "WeightedRegressionFit",
    "adoption_schedule",
    "bootstrap_variance",
    "build_panel",
    "confidence_interval",
    "estimate",
    "estimate_block",
    "event_bands",
    "event_series",
    "jackknife_variance",
    "noise_scale",
    "panel_from_matrices",
    "placebo_variance",
    "project_out_optimized",
    "project_out_projected",
    "regularizer",
    "solve_simplex_ridge",
    "solve_time_weights",
    "solve_unit_weights",
    "subset_for_adoption",
    "time_regularizer",
    "unit_regularizer",
    "validate_records",
    "weighted_did",
]
