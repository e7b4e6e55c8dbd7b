"""Typed errors for panel validation, estimation, and inference.

Every error carries a stable machine-readable ``code`` (used by the CLI to
emit structured error objects) and, where it helps diagnosis, the offending
unit/time identifiers.
"""

from __future__ import annotations


class SdidError(Exception):
    """Base class for all estimation-pipeline errors."""

    code = "Error"

    def __init__(self, message: str, ids: list | tuple | None = None):
        super().__init__(message)
        self.ids = list(ids) if ids is not None else []

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self), "ids": self.ids}


class UnbalancedError(SdidError):
    """A unit is missing periods, periods are gapped/non-integer, or a
    (unit, time) pair appears more than once."""

    code = "Unbalanced"


class AlwaysTreatedError(SdidError):
    """A unit is already treated in the first observed period."""

    code = "AlwaysTreated"


class NoPureControlsError(SdidError):
    """No unit remains untreated for the whole sample."""

    code = "NoPureControls"


class NonAbsorbingTreatmentError(SdidError):
    """A unit's treatment switches off after switching on."""

    code = "NonAbsorbingTreatment"


class MissingValueError(SdidError):
    """An outcome, treatment, or covariate value is absent or unparseable."""

    code = "MissingValue"


class ConstantCovariateError(SdidError):
    """A covariate takes a single value across all observations."""

    code = "ConstantCovariate"


class UnknownAdoptionPeriodError(SdidError):
    code = "UnknownAdoptionPeriod"


class TooFewPrePeriodsError(SdidError):
    code = "TooFewPrePeriods"


class DegenerateDesignError(SdidError):
    """Estimation subproblem has no pre periods, no post periods, or no
    treated/control units."""

    code = "DegenerateDesign"


class RankDeficientError(SdidError):
    """Covariates are collinear (with each other or with unit/time effects)."""

    code = "RankDeficient"


class InsufficientUntreatedObservationsError(SdidError):
    code = "InsufficientUntreatedObservations"


class TooFewTreatedError(SdidError):
    """Bootstrap requires more than one treated unit."""

    code = "TooFewTreated"


class SingleTreatedUnitError(SdidError):
    """Jackknife requires at least two treated units per adoption period."""

    code = "SingleTreatedUnit"


class NotEnoughControlsError(SdidError):
    """Placebo assignment requires more controls than treated units."""

    code = "NotEnoughControls"


class ResampleExhaustionError(SdidError):
    """Too many consecutive bootstrap resamples were discarded."""

    code = "ResampleExhaustion"


class ConvergenceWarning(UserWarning):
    """A weight solver returned its best iterate without meeting tolerance."""
