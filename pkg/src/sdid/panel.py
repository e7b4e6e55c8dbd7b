"""Balanced-panel construction and validation.

Long-format records (one row per unit and period) are validated and packed
into immutable matrices with a canonical unit ordering: pure controls first,
sorted by id, then treated units sorted by adoption period and id.  All
downstream weight and estimation code indexes into this layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    AlwaysTreatedError,
    ConstantCovariateError,
    MissingValueError,
    NoPureControlsError,
    NonAbsorbingTreatmentError,
    SdidError,
    UnbalancedError,
    UnknownAdoptionPeriodError,
)

_MISSING_TOKENS = {"", ".", "na", "nan", "none", "null"}


@dataclass(frozen=True)
class ColumnSpec:
    """Names of the long-format columns holding each panel field."""

    unit: str = "unit"
    time: str = "time"
    outcome: str = "outcome"
    treatment: str = "treated"
    covariates: tuple[str, ...] = ()


@dataclass(frozen=True)
class PanelRecord:
    """One observation: a unit at a period."""

    unit_id: str
    time_id: int
    outcome: float
    treated: bool
    covariates: tuple[float, ...] = ()


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of record validation; ``ok`` iff no violations were found."""

    ok: bool
    violations: tuple[tuple[str, str, tuple], ...] = ()

    def codes(self) -> set[str]:
        return {code for code, _, _ in self.violations}


@dataclass(frozen=True)
class BalancedPanel:
    """An N x T balanced panel with absorbing treatment.

    ``units`` lists controls first (indices 0..N_co-1) then treated units;
    ``Y`` is the outcome matrix, ``W`` the treatment indicator matrix, and
    ``X`` an N x T x K covariate tensor (K may be zero).  Arrays are marked
    read-only; construct a new panel to modify anything.
    """

    units: tuple[str, ...]
    times: tuple[int, ...]
    Y: np.ndarray
    W: np.ndarray
    X: np.ndarray
    N_co: int
    N_tr: int
    covariate_names: tuple[str, ...] = ()

    @property
    def N(self) -> int:
        return self.N_co + self.N_tr

    @property
    def T(self) -> int:
        return len(self.times)

    @property
    def K(self) -> int:
        return self.X.shape[2]

    def first_treated_cols(self) -> np.ndarray:
        """Column index of each unit's first treated period; T for controls."""
        cols = np.where(self.W.any(axis=1), self.W.argmax(axis=1), self.T)
        return cols.astype(np.int64)

    @property
    def is_block_design(self) -> bool:
        cols = self.first_treated_cols()[self.N_co :]
        return self.N_tr > 0 and bool(np.all(cols == cols[0]))

    def treated_start_col(self) -> int:
        """Shared adoption column of a block-design panel."""
        if self.N_tr == 0:
            raise SdidError("panel has no treated units")
        cols = self.first_treated_cols()[self.N_co :]
        if not np.all(cols == cols[0]):
            raise SdidError("panel is not a block design; subset by adoption period first")
        return int(cols[0])

    def with_outcome(self, Y_new: np.ndarray) -> "BalancedPanel":
        """Copy of this panel with a replaced outcome matrix."""
        Y_new = np.ascontiguousarray(Y_new, dtype=np.float64)
        if Y_new.shape != self.Y.shape:
            raise ValueError(f"outcome shape {Y_new.shape} != {self.Y.shape}")
        Y_new.setflags(write=False)
        return BalancedPanel(
            units=self.units,
            times=self.times,
            Y=Y_new,
            W=self.W,
            X=self.X,
            N_co=self.N_co,
            N_tr=self.N_tr,
            covariate_names=self.covariate_names,
        )

    def to_records(self) -> list[PanelRecord]:
        """Flatten back to long-format records in canonical order."""
        out = []
        for i, unit in enumerate(self.units):
            for t, time in enumerate(self.times):
                out.append(
                    PanelRecord(
                        unit_id=unit,
                        time_id=time,
                        outcome=float(self.Y[i, t]),
                        treated=bool(self.W[i, t]),
                        covariates=tuple(float(v) for v in self.X[i, t]),
                    )
                )
        return out


@dataclass(frozen=True)
class AdoptionSchedule:
    """Distinct adoption periods and the post-period mass of each cohort.

    ``total_post`` counts treated unit-periods: each cohort contributes
    (number of adopters) x (periods from adoption to the end of the sample).
    Cohort weights are those counts normalized to sum to one.
    """

    periods: tuple[int, ...]
    unit_adoption: Mapping[str, int | None]
    adopter_counts: tuple[int, ...]
    post_counts: tuple[int, ...]
    total_post: int

    @property
    def weights(self) -> tuple[float, ...]:
        return tuple(
            n * p / self.total_post for n, p in zip(self.adopter_counts, self.post_counts)
        )


def _parse_float(value, where: str):
    if value is None:
        raise MissingValueError(f"missing value for {where}", ids=[where])
    if isinstance(value, str):
        if value.strip().lower() in _MISSING_TOKENS:
            raise MissingValueError(f"missing value for {where}", ids=[where])
        try:
            value = float(value)
        except ValueError:
            raise MissingValueError(f"unparseable value {value!r} for {where}", ids=[where]) from None
    value = float(value)
    if math.isnan(value):
        raise MissingValueError(f"missing value for {where}", ids=[where])
    return value


def _parse_time(value, where: str) -> int:
    if isinstance(value, bool):
        raise UnbalancedError(f"time id must be an integer, got {value!r} at {where}", ids=[where])
    if isinstance(value, str):
        value = value.strip()
    try:
        as_float = float(value)
    except (TypeError, ValueError):
        raise UnbalancedError(f"time id must be an integer, got {value!r} at {where}", ids=[where]) from None
    if not as_float.is_integer():
        raise UnbalancedError(f"time id must be an integer, got {value!r} at {where}", ids=[where])
    return int(as_float)


def _parse_treated(value, where: str) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)) and value in (0, 1):
        return bool(value)
    if isinstance(value, str):
        v = value.strip().lower()
        if v in ("0", "false"):
            return False
        if v in ("1", "true"):
            return True
    raise MissingValueError(f"treatment must be 0 or 1, got {value!r} at {where}", ids=[where])


def _coerce_records(rows: Iterable, columns: ColumnSpec) -> list[PanelRecord]:
    records = []
    for idx, row in enumerate(rows):
        if isinstance(row, PanelRecord):
            records.append(row)
            continue
        if not isinstance(row, Mapping):
            raise TypeError(f"row {idx} is neither a PanelRecord nor a mapping: {row!r}")
        try:
            unit = str(row[columns.unit])
            raw_time = row[columns.time]
            raw_outcome = row[columns.outcome]
            raw_treated = row[columns.treatment]
        except KeyError as exc:
            raise SdidError(f"column {exc.args[0]!r} not found in input row {idx}") from None
        where = f"unit={unit!r} row={idx}"
        time = _parse_time(raw_time, where)
        covs = []
        for name in columns.covariates:
            if name not in row:
                raise SdidError(f"covariate column {name!r} not found in input row {idx}")
            covs.append(_parse_float(row[name], f"{name} at {where}"))
        records.append(
            PanelRecord(
                unit_id=unit,
                time_id=time,
                outcome=_parse_float(raw_outcome, f"outcome at {where}"),
                treated=_parse_treated(raw_treated, where),
                covariates=tuple(covs),
            )
        )
    return records


def _unit_sort_key(unit_ids: Sequence[str]):
    """Numeric order when every id parses as a number, else lexicographic."""

    def numeric(u: str):
        try:
            return float(u)
        except ValueError:
            return None

    if all(numeric(u) is not None for u in unit_ids):
        return lambda u: (numeric(u), u)
    return lambda u: u


def validate_records(records: Sequence[PanelRecord]) -> ValidationReport:
    """Collect every violation of the balanced-panel requirements."""
    violations: list[tuple[str, str, tuple]] = []
    if not records:
        return ValidationReport(ok=False, violations=((UnbalancedError.code, "no records", ()),))

    k = len(records[0].covariates)
    times = sorted({r.time_id for r in records})
    units = sorted({r.unit_id for r in records}, key=_unit_sort_key([r.unit_id for r in records]))

    seen: dict[tuple[str, int], PanelRecord] = {}
    dupes = []
    for r in records:
        if len(r.covariates) != k:
            violations.append(
                (MissingValueError.code, "covariate count varies across records", (r.unit_id, r.time_id))
            )
            return ValidationReport(ok=False, violations=tuple(violations))
        key = (r.unit_id, r.time_id)
        if key in seen:
            dupes.append(key)
        seen[key] = r
    if dupes:
        violations.append(
            (UnbalancedError.code, "duplicate (unit, time) observations", tuple(sorted(set(dupes))))
        )

    gaps = [
        (a, b) for a, b in zip(times, times[1:]) if b - a != 1
    ]
    if gaps:
        violations.append(
            (UnbalancedError.code, "time periods are not consecutive integers", tuple(gaps))
        )

    incomplete = [u for u in units if sum(1 for t in times if (u, t) in seen) != len(times)]
    if incomplete:
        violations.append(
            (UnbalancedError.code, "units missing some periods", tuple(incomplete))
        )
        return ValidationReport(ok=False, violations=tuple(violations))

    non_absorbing = []
    always_treated = []
    any_control = False
    for u in units:
        path = [seen[(u, t)].treated for t in times]
        on = False
        for flag in path:
            if on and not flag:
                non_absorbing.append(u)
                break
            on = on or flag
        if path[0]:
            always_treated.append(u)
        if not any(path):
            any_control = True
    if non_absorbing:
        violations.append(
            (NonAbsorbingTreatmentError.code, "treatment switches off after switching on", tuple(non_absorbing))
        )
    if always_treated:
        violations.append(
            (AlwaysTreatedError.code, "units treated from the first period", tuple(always_treated))
        )
    if not any_control:
        violations.append(
            (NoPureControlsError.code, "no never-treated unit to act as a control", ())
        )

    for j in range(k):
        vals = {r.covariates[j] for r in records}
        if len(vals) == 1:
            violations.append(
                (ConstantCovariateError.code, f"covariate {j} is constant", (j,))
            )

    return ValidationReport(ok=not violations, violations=tuple(violations))


_ERROR_BY_CODE = {
    cls.code: cls
    for cls in (
        UnbalancedError,
        NonAbsorbingTreatmentError,
        AlwaysTreatedError,
        NoPureControlsError,
        ConstantCovariateError,
        MissingValueError,
    )
}


def build_panel(
    rows: Iterable,
    columns: ColumnSpec | None = None,
    covariate_names: Sequence[str] | None = None,
) -> BalancedPanel:
    """Validate long-format rows and pack them into a BalancedPanel.

    ``rows`` may be PanelRecord instances or mappings (e.g. CSV rows), in
    which case ``columns`` names the relevant fields.  Raises the specific
    validation error for the first violation class encountered.
    """
    columns = columns or ColumnSpec()
    records = _coerce_records(rows, columns)
    report = validate_records(records)
    if not report.ok:
        code, message, ids = report.violations[0]
        raise _ERROR_BY_CODE.get(code, SdidError)(message, ids=list(ids))

    if covariate_names is None:
        covariate_names = columns.covariates
    k = len(records[0].covariates)
    if covariate_names and len(covariate_names) != k:
        raise ValueError("covariate_names length does not match record covariates")

    times = sorted({r.time_id for r in records})
    by_key = {(r.unit_id, r.time_id): r for r in records}
    unit_ids = sorted({r.unit_id for r in records}, key=_unit_sort_key([r.unit_id for r in records]))

    adoption: dict[str, int | None] = {}
    for u in unit_ids:
        treated_times = [t for t in times if by_key[(u, t)].treated]
        adoption[u] = min(treated_times) if treated_times else None

    controls = [u for u in unit_ids if adoption[u] is None]
    treated = sorted(
        (u for u in unit_ids if adoption[u] is not None),
        key=lambda u: (adoption[u], _unit_sort_key(unit_ids)(u)),
    )
    ordered = controls + treated

    n, t_len = len(ordered), len(times)
    Y = np.empty((n, t_len), dtype=np.float64)
    W = np.zeros((n, t_len), dtype=bool)
    X = np.empty((n, t_len, k), dtype=np.float64)
    for i, u in enumerate(ordered):
        for j, tm in enumerate(times):
            rec = by_key[(u, tm)]
            Y[i, j] = rec.outcome
            W[i, j] = rec.treated
            X[i, j, :] = rec.covariates
    for arr in (Y, W, X):
        arr.setflags(write=False)

    return BalancedPanel(
        units=tuple(ordered),
        times=tuple(times),
        Y=Y,
        W=W,
        X=X,
        N_co=len(controls),
        N_tr=len(treated),
        covariate_names=tuple(covariate_names or ()),
    )


def panel_from_matrices(
    Y: np.ndarray,
    W: np.ndarray,
    times: Sequence[int],
    units: Sequence[str] | None = None,
    X: np.ndarray | None = None,
    covariate_names: Sequence[str] = (),
) -> BalancedPanel:
    """Build a panel directly from matrices, re-sorting rows canonically.

    Intended for resampling paths where rows are already clean; performs the
    ordering (controls first, treated by adoption then label) but none of the
    record-level validation of :func:`build_panel`.
    """
    Y = np.asarray(Y, dtype=np.float64)
    W = np.asarray(W, dtype=bool)
    n, t_len = Y.shape
    if X is None:
        X = np.zeros((n, t_len, 0), dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if units is None:
        units = [f"u{i:06d}" for i in range(n)]
    units = [str(u) for u in units]

    first = np.where(W.any(axis=1), W.argmax(axis=1), t_len)
    order = sorted(range(n), key=lambda i: (first[i] < t_len, first[i], units[i]))
    Y, W, X = Y[order], W[order], X[order, :, :]
    units = [units[i] for i in order]
    n_co = int(np.sum(first == t_len))

    Y = np.ascontiguousarray(Y)
    W = np.ascontiguousarray(W)
    X = np.ascontiguousarray(X)
    for arr in (Y, W, X):
        arr.setflags(write=False)
    return BalancedPanel(
        units=tuple(units),
        times=tuple(int(t) for t in times),
        Y=Y,
        W=W,
        X=X,
        N_co=n_co,
        N_tr=n - n_co,
        covariate_names=tuple(covariate_names),
    )


def adoption_schedule(panel: BalancedPanel) -> AdoptionSchedule:
    """Distinct adoption periods, adopter counts, and post-period counts."""
    cols = panel.first_treated_cols()
    treated_cols = cols[panel.N_co :]
    distinct = sorted(set(int(c) for c in treated_cols))
    periods = tuple(panel.times[c] for c in distinct)
    counts = tuple(int(np.sum(treated_cols == c)) for c in distinct)
    posts = tuple(panel.T - c for c in distinct)
    unit_adoption: dict[str, int | None] = {}
    for i, u in enumerate(panel.units):
        unit_adoption[u] = None if cols[i] == panel.T else panel.times[int(cols[i])]
    total = sum(n * p for n, p in zip(counts, posts))
    return AdoptionSchedule(
        periods=periods,
        unit_adoption=unit_adoption,
        adopter_counts=counts,
        post_counts=posts,
        total_post=total,
    )


def subset_for_adoption(panel: BalancedPanel, adoption_period: int) -> BalancedPanel:
    """All pure controls plus the units first treated at ``adoption_period``."""
    if adoption_period not in set(panel.times):
        raise UnknownAdoptionPeriodError(
            f"{adoption_period} is not a sample period", ids=[adoption_period]
        )
    col = panel.times.index(adoption_period)
    cols = panel.first_treated_cols()
    keep = [i for i in range(panel.N) if cols[i] == panel.T or cols[i] == col]
    n_tr = sum(1 for i in keep if cols[i] == col)
    if n_tr == 0:
        raise UnknownAdoptionPeriodError(
            f"no unit adopts treatment at period {adoption_period}", ids=[adoption_period]
        )
    Y = np.ascontiguousarray(panel.Y[keep])
    W = np.ascontiguousarray(panel.W[keep])
    X = np.ascontiguousarray(panel.X[keep])
    for arr in (Y, W, X):
        arr.setflags(write=False)
    return BalancedPanel(
        units=tuple(panel.units[i] for i in keep),
        times=panel.times,
        Y=Y,
        W=W,
        X=X,
        N_co=panel.N_co,
        N_tr=n_tr,
        covariate_names=panel.covariate_names,
    )
