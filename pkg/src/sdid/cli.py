"""CSV-in / JSON-out command-line front end.

``sdid INPUT.csv DEPVAR GROUPVAR TIMEVAR TREATMENT [options]`` reads a
long-format CSV (``-`` for standard input), estimates the requested effect,
runs the requested inference, and prints a JSON result document to standard
output.  ``--plot-data`` additionally writes per-adoption trend files
(``trends<PERIOD>.csv``) and, with ``--g1on``, unit-weight files
(``weights<PERIOD>.csv``) suitable for external plotting.

Exit codes: 0 success, 2 validation/configuration error, 3 a solver returned
without converging and ``--strict`` was set, 4 input/output error.  Errors
are emitted as one JSON object on standard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .covariates import CovariateFit, CovariateMode
from .errors import ConvergenceWarning, SdidError
from .estimator import MethodKind, SdidResult, estimate
from .inference import (
    InferenceResult,
    RngSpec,
    VarianceMethod,
    bootstrap_variance,
    jackknife_variance,
    placebo_variance,
)
from .panel import BalancedPanel, ColumnSpec, build_panel
from .weights import SolverConfig


@dataclass(frozen=True)
class RunConfig:
    """One CLI invocation, resolved."""

    input_path: str
    outcome: str
    unit: str
    time: str
    treatment: str
    covariates: tuple[str, ...] = ()
    covariate_type: str = "optimized"
    standardize: bool = True
    method: str = "sdid"
    vce: str = "noinference"
    seed: int = 0
    reps: int = 50
    ci_level: float = 0.95
    output_dir: str = "."
    emit_plot_data: bool = False
    emit_unit_weights: bool = False
    label_weights: bool = False
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    strict: bool = False
    max_iterations: int = 10_000
    tolerance: float = 1e-5


def _read_rows(path: str) -> list[dict]:
    if path == "-":
        text = sys.stdin.read()
    else:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            text = fh.read()
    reader = csv.DictReader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        raise SdidError("input contains no data rows")
    return rows


def _weight_label(panel: BalancedPanel, index: int, label_weights: bool):
    unit = panel.units[index]
    if label_weights:
        return unit
    try:
        num = float(unit)
        return int(num) if num.is_integer() else num
    except ValueError:
        return index + 1


def _beta_entry(fit: CovariateFit) -> list[dict]:
    return [
        {"name": name, "value": float(b)}
        for name, b in zip(fit.names, fit.beta)
    ]


def _document(config: RunConfig, panel: BalancedPanel, fit: SdidResult,
              inference: InferenceResult | None) -> dict:
    sched = fit.schedule
    per_adoption_var = dict(inference.per_adoption or ()) if inference else {}

    tau_table = []
    for est, weight in zip(fit.adoption_estimates, sched.weights):
        var_a = per_adoption_var.get(est.adoption_period)
        tau_table.append(
            {
                "adoption": est.adoption_period,
                "tau": est.tau,
                "t_post": est.t_post,
                "adopters": est.adopter_count,
                "weight": weight,
                "se": float(np.sqrt(var_a)) if var_a is not None else None,
            }
        )

    beta: dict | None = None
    if isinstance(fit.beta, CovariateFit):
        beta = {"mode": fit.beta.mode, "coefficients": _beta_entry(fit.beta)}
    elif isinstance(fit.beta, tuple):
        beta = {
            "mode": "optimized",
            "by_adoption": [
                {"adoption": est.adoption_period, "coefficients": _beta_entry(b)}
                for est, b in zip(fit.adoption_estimates, fit.beta)
            ],
        }

    lambda_table = []
    omega_table = []
    series_table = []
    difference_table = []
    for est in fit.adoption_estimates:
        a_col = est.times.index(est.adoption_period)
        lambda_table.append(
            {
                "adoption": est.adoption_period,
                "weights": [
                    {"time": t, "weight": float(w)}
                    for t, w in zip(est.times[:a_col], est.time_weights.lam)
                ],
            }
        )
        omega_table.append(
            {
                "adoption": est.adoption_period,
                "intercept": float(est.unit_weights.omega0),
                "weights": [
                    {
                        "unit": _weight_label(panel, i, config.label_weights),
                        "weight": float(w),
                    }
                    for i, w in enumerate(est.unit_weights.omega)
                ],
            }
        )
        series_table.append(
            {
                "adoption": est.adoption_period,
                "rows": [
                    {"time": t, "treated": float(y1), "control": float(y0)}
                    for t, y1, y0 in zip(est.times, est.treated_series, est.control_series)
                ],
            }
        )
        difference_table.append(
            {
                "adoption": est.adoption_period,
                "rows": [
                    {"time": t, "difference": float(d)}
                    for t, d in zip(est.times, est.difference)
                ],
            }
        )

    return {
        "command": "sdid",
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "depvar": config.outcome,
        "unit_var": config.unit,
        "time_var": config.time,
        "treatment_var": config.treatment,
        "method": fit.method.value,
        "vce": config.vce,
        "seed": config.seed,
        "ci_level": config.ci_level,
        "design": "block" if len(sched.periods) == 1 else "staggered",
        "N_clust": panel.N,
        "panel": {
            "N": panel.N,
            "N_co": panel.N_co,
            "N_tr": panel.N_tr,
            "T": panel.T,
            "first_period": panel.times[0],
            "last_period": panel.times[-1],
        },
        "att": fit.att,
        "se": inference.se if inference else None,
        "ci": list(inference.ci) if inference else None,
        "reps": inference.reps_used if inference else None,
        "reps_discarded": inference.reps_discarded if inference else None,
        "adoption": list(sched.periods),
        "tau": tau_table,
        "beta": beta,
        "lambda": lambda_table,
        "omega": omega_table,
        "series": series_table,
        "difference": difference_table,
        "converged": fit.converged,
    }


def _write_plot_data(config: RunConfig, panel: BalancedPanel, fit: SdidResult) -> list[str]:
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for est in fit.adoption_estimates:
        a_col = est.times.index(est.adoption_period)
        lam_full = np.zeros(len(est.times))
        lam_full[:a_col] = est.time_weights.lam
        path = out_dir / f"trends{est.adoption_period}.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time", "treated", "control", "difference", "lambda_weight"])
            for t, y1, y0, d, w in zip(
                est.times, est.treated_series, est.control_series, est.difference, lam_full
            ):
                writer.writerow([t, repr(float(y1)), repr(float(y0)), repr(float(d)), repr(float(w))])
        written.append(str(path))
        if config.emit_unit_weights:
            path = out_dir / f"weights{est.adoption_period}.csv"
            with open(path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["unit", "weight"])
                for i, w in enumerate(est.unit_weights.omega):
                    writer.writerow(
                        [_weight_label(panel, i, config.label_weights), repr(float(w))]
                    )
            written.append(str(path))
    return written


def run(config: RunConfig) -> dict:
    """Execute one configured run and return the result document."""
    rows = _read_rows(config.input_path)
    panel = build_panel(
        rows,
        ColumnSpec(
            unit=config.unit,
            time=config.time,
            outcome=config.outcome,
            treatment=config.treatment,
            covariates=config.covariates,
        ),
    )
    cov_mode = (
        CovariateMode(kind=config.covariate_type, standardize=config.standardize)
        if config.covariates
        else None
    )
    solver = SolverConfig(
        max_iterations=config.max_iterations,
        relative_decrease_tolerance=config.tolerance,
    )
    fit = estimate(panel, MethodKind(config.method), cov_mode, solver)

    vce = VarianceMethod(config.vce)
    inference: InferenceResult | None = None
    if vce is VarianceMethod.BOOTSTRAP:
        inference = bootstrap_variance(
            panel, fit.method, cov_mode, config.reps, RngSpec(config.seed), solver,
            ci_level=config.ci_level, point_estimate=fit.att, threads=config.threads,
        )
    elif vce is VarianceMethod.PLACEBO:
        inference = placebo_variance(
            panel, fit.method, cov_mode, config.reps, RngSpec(config.seed), solver,
            ci_level=config.ci_level, point_estimate=fit.att, threads=config.threads,
        )
    elif vce is VarianceMethod.JACKKNIFE:
        inference = jackknife_variance(panel, fit, ci_level=config.ci_level)

    if inference is not None:
        fit = fit.with_variance(inference)
    doc = _document(config, panel, fit, inference)
    if config.emit_plot_data:
        _write_plot_data(config, panel, fit)
    return doc


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdid",
        description="Synthetic difference-in-differences estimation on a long-format CSV panel.",
    )
    parser.add_argument("input", help="CSV path, or - for standard input")
    parser.add_argument("depvar", help="outcome column")
    parser.add_argument("groupvar", help="unit column")
    parser.add_argument("timevar", help="time column (consecutive integers)")
    parser.add_argument("treatment", help="treatment column, 0/1, absorbing")
    parser.add_argument("--method", choices=[m.value for m in MethodKind], default="sdid")
    parser.add_argument(
        "--vce",
        choices=[v.value for v in VarianceMethod],
        default="noinference",
        help="inference procedure (bootstrap needs >1 treated unit; placebo needs more controls than treated)",
    )
    parser.add_argument("--seed", type=int, default=0, help="seed for replicate random streams")
    parser.add_argument("--reps", type=int, default=50, help="bootstrap/placebo replicates; prefer more than the default")
    parser.add_argument("--covariates", default="", help="comma-separated covariate columns")
    parser.add_argument(
        "--covariate-type", choices=["optimized", "projected"], default="optimized",
        help="optimized: coefficients fit jointly with the weights per adoption period; projected: one coefficient vector from untreated observations",
    )
    parser.add_argument(
        "--unstandardized", action="store_true",
        help="skip Z-scoring of covariates in optimized mode (use with care)",
    )
    parser.add_argument("--ci-level", type=float, default=0.95)
    parser.add_argument("--output-dir", default=".", help="directory for plot-data CSV files")
    parser.add_argument("--plot-data", action="store_true", help="write trends<PERIOD>.csv per adoption period")
    parser.add_argument("--g1on", action="store_true", help="also write weights<PERIOD>.csv per adoption period")
    parser.add_argument("--mattitles", action="store_true", help="label unit weights with unit ids instead of numeric ids")
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="replicate parallelism (results are identical for any value)")
    parser.add_argument("--strict", action="store_true",
                        help="exit 3 if any solver finished without meeting its tolerance")
    parser.add_argument("--max-iterations", type=int, default=10_000,
                        help="iteration cap for the weight solver")
    parser.add_argument("--tolerance", type=float, default=1e-5,
                        help="relative stationarity tolerance for the weight solver")
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    covariates = tuple(c.strip() for c in args.covariates.split(",") if c.strip())
    return RunConfig(
        input_path=args.input,
        outcome=args.depvar,
        unit=args.groupvar,
        time=args.timevar,
        treatment=args.treatment,
        covariates=covariates,
        covariate_type=args.covariate_type,
        standardize=not args.unstandardized,
        method=args.method,
        vce=args.vce,
        seed=args.seed,
        reps=args.reps,
        ci_level=args.ci_level,
        output_dir=args.output_dir,
        emit_plot_data=args.plot_data,
        emit_unit_weights=args.g1on,
        label_weights=args.mattitles,
        threads=args.threads,
        strict=args.strict,
        max_iterations=args.max_iterations,
        tolerance=args.tolerance,
    )


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    config = _config_from_args(args)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ConvergenceWarning)
            doc = run(config)
    except SdidError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(json.dumps({"error": "InvalidConfig", "message": str(exc), "ids": []}), file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"error": "IOError", "message": str(exc), "ids": []}), file=sys.stderr)
        return 4

    print(json.dumps(doc, indent=2))
    convergence_issues = [str(w.message) for w in caught if issubclass(w.category, ConvergenceWarning)]
    if not doc["converged"]:
        convergence_issues.append("a weight solver returned its best iterate without converging")
    if convergence_issues and config.strict:
        print(
            json.dumps({"error": "NonConvergence", "message": "; ".join(convergence_issues), "ids": []}),
            file=sys.stderr,
        )
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
