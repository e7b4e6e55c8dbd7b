/**
 * Thin client for the sdid estimation engine.
 *
 * The binding performs no computation of its own: a columnar in-memory table
 * is serialized to CSV, piped to the engine's command-line interface on
 * standard input, and the JSON result document is parsed back into native
 * objects and arrays. Engine errors arrive as structured objects on standard
 * error and are rethrown as typed exceptions carrying the engine's stable
 * error codes. Because the engine runs in its own process, calls never hold
 * any lock in the calling runtime.
 */

import { spawn } from "child_process";

export type CellValue = number | string | boolean;

/** Columnar table: one equal-length array per column. */
export type ColumnarTable = Record<string, ReadonlyArray<CellValue>>;

export interface ColumnNames {
  outcome: string;
  unit: string;
  time: string;
  treatment: string;
  covariates?: ReadonlyArray<string>;
}

export interface EstimateOptions {
  method?: "sdid" | "did" | "sc";
  vce?: "bootstrap" | "jackknife" | "placebo" | "noinference";
  seed?: number;
  reps?: number;
  covariateType?: "optimized" | "projected";
  /** Entered as-is instead of Z-scored in optimized mode when false. */
  standardize?: boolean;
  ciLevel?: number;
  threads?: number;
  labelWeights?: boolean;
  maxIterations?: number;
  tolerance?: number;
  /** Interpreter used to launch the engine (default "python3"). */
  pythonPath?: string;
}

export interface TauEntry {
  adoption: number;
  tau: number;
  t_post: number;
  adopters: number;
  weight: number;
  se: number | null;
}

export interface WeightEntry {
  unit: string | number;
  weight: number;
}

export interface SeriesRow {
  time: number;
  treated: number;
  control: number;
}

export interface ResultDocument {
  command: string;
  generated_at: string;
  depvar: string;
  unit_var: string;
  time_var: string;
  treatment_var: string;
  method: string;
  vce: string;
  seed: number;
  ci_level: number;
  design: "block" | "staggered";
  N_clust: number;
  panel: {
    N: number;
    N_co: number;
    N_tr: number;
    T: number;
    first_period: number;
    last_period: number;
  };
  att: number;
  se: number | null;
  ci: [number, number] | null;
  reps: number | null;
  reps_discarded: number | null;
  adoption: number[];
  tau: TauEntry[];
  beta:
    | null
    | { mode: "projected"; coefficients: { name: string; value: number }[] }
    | {
        mode: "optimized";
        by_adoption: { adoption: number; coefficients: { name: string; value: number }[] }[];
      };
  lambda: { adoption: number; weights: { time: number; weight: number }[] }[];
  omega: { adoption: number; intercept: number; weights: WeightEntry[] }[];
  series: { adoption: number; rows: SeriesRow[] }[];
  difference: { adoption: number; rows: { time: number; difference: number }[] }[];
  converged: boolean;
}

/** Base class for engine failures; `code` is the engine's stable identifier. */
export class SdidError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly ids: Array<string | number> = [],
    public readonly exitCode: number = 2,
  ) {
    super(message);
    this.name = `SdidError(${code})`;
  }
}

export class UnbalancedError extends SdidError {}
export class AlwaysTreatedError extends SdidError {}
export class NoPureControlsError extends SdidError {}
export class NonAbsorbingTreatmentError extends SdidError {}
export class MissingValueError extends SdidError {}
export class ConstantCovariateError extends SdidError {}
export class UnknownAdoptionPeriodError extends SdidError {}
export class TooFewPrePeriodsError extends SdidError {}
export class DegenerateDesignError extends SdidError {}
export class RankDeficientError extends SdidError {}
export class InsufficientUntreatedObservationsError extends SdidError {}
export class TooFewTreatedError extends SdidError {}
export class SingleTreatedUnitError extends SdidError {}
export class NotEnoughControlsError extends SdidError {}
export class ResampleExhaustionError extends SdidError {}
export class InvalidConfigError extends SdidError {}
export class EngineIOError extends SdidError {}

const ERROR_CLASSES: Record<string, typeof SdidError> = {
  Unbalanced: UnbalancedError,
  AlwaysTreated: AlwaysTreatedError,
  NoPureControls: NoPureControlsError,
  NonAbsorbingTreatment: NonAbsorbingTreatmentError,
  MissingValue: MissingValueError,
  ConstantCovariate: ConstantCovariateError,
  UnknownAdoptionPeriod: UnknownAdoptionPeriodError,
  TooFewPrePeriods: TooFewPrePeriodsError,
  DegenerateDesign: DegenerateDesignError,
  RankDeficient: RankDeficientError,
  InsufficientUntreatedObservations: InsufficientUntreatedObservationsError,
  TooFewTreated: TooFewTreatedError,
  SingleTreatedUnit: SingleTreatedUnitError,
  NotEnoughControls: NotEnoughControlsError,
  ResampleExhaustion: ResampleExhaustionError,
  InvalidConfig: InvalidConfigError,
  IOError: EngineIOError,
};

function escapeCsvField(value: CellValue): string {
  const text =
    typeof value === "boolean" ? (value ? "1" : "0") : String(value);
  return /[",\n\r]/.test(text) ? `"${text.replace(/"/g, '""')}"` : text;
}

/** Serialize a columnar table to CSV text (header row first). */
export function tableToCsv(table: ColumnarTable): string {
  const names = Object.keys(table);
  if (names.length === 0) throw new Error("table has no columns");
  const length = table[names[0]].length;
  for (const name of names) {
    if (table[name].length !== length) {
      throw new Error(`column ${name} has length ${table[name].length}, expected ${length}`);
    }
  }
  const lines = [names.map(escapeCsvField).join(",")];
  for (let i = 0; i < length; i++) {
    lines.push(names.map((name) => escapeCsvField(table[name][i])).join(","));
  }
  return lines.join("\n") + "\n";
}

export function cliArguments(columns: ColumnNames, options: EstimateOptions = {}): string[] {
  const args = [
    "-m",
    "sdid.cli",
    "-",
    columns.outcome,
    columns.unit,
    columns.time,
    columns.treatment,
  ];
  if (columns.covariates && columns.covariates.length > 0) {
    args.push("--covariates", columns.covariates.join(","));
    if (options.covariateType) args.push("--covariate-type", options.covariateType);
    if (options.standardize === false) args.push("--unstandardized");
  }
  if (options.method) args.push("--method", options.method);
  if (options.vce) args.push("--vce", options.vce);
  if (options.seed !== undefined) args.push("--seed", String(options.seed));
  if (options.reps !== undefined) args.push("--reps", String(options.reps));
  if (options.ciLevel !== undefined) args.push("--ci-level", String(options.ciLevel));
  if (options.threads !== undefined) args.push("--threads", String(options.threads));
  if (options.labelWeights) args.push("--mattitles");
  if (options.maxIterations !== undefined) args.push("--max-iterations", String(options.maxIterations));
  if (options.tolerance !== undefined) args.push("--tolerance", String(options.tolerance));
  return args;
}

function throwEngineError(stderr: string, exitCode: number): never {
  let payload: { error?: string; message?: string; ids?: Array<string | number> } = {};
  const line = stderr.trim().split("\n").pop() ?? "";
  try {
    payload = JSON.parse(line);
  } catch {
    throw new SdidError("EngineFailure", stderr.trim() || `engine exited with code ${exitCode}`, [], exitCode);
  }
  const cls = ERROR_CLASSES[payload.error ?? ""] ?? SdidError;
  throw new cls(payload.error ?? "EngineFailure", payload.message ?? "engine error", payload.ids ?? [], exitCode);
}

/**
 * Estimate on an in-memory columnar table by piping it through the engine.
 *
 * Results are identical to running the CLI on a CSV file holding the same
 * rows: the binding adds nothing and changes nothing.
 */
export function estimateSdid(
  table: ColumnarTable,
  columns: ColumnNames,
  options: EstimateOptions = {},
): Promise<ResultDocument> {
  const csv = tableToCsv(table);
  const python = options.pythonPath ?? "python3";
  const args = cliArguments(columns, options);
  return new Promise((resolve, reject) => {
    const child = spawn(python, args, { stdio: ["pipe", "pipe", "pipe"] });
    let stdout = "";
    let stderr = "";
    child.stdout.on("data", (chunk) => (stdout += chunk));
    child.stderr.on("data", (chunk) => (stderr += chunk));
    child.on("error", (err) => reject(new SdidError("SpawnFailure", err.message, [], 4)));
    child.on("close", (code) => {
      if (code === 0 || code === 3) {
        try {
          resolve(JSON.parse(stdout) as ResultDocument);
        } catch (err) {
          reject(new SdidError("BadEngineOutput", String(err), [], 1));
        }
        return;
      }
      try {
        throwEngineError(stderr, code ?? 1);
      } catch (err) {
        reject(err);
      }
    });
    child.stdin.write(csv);
    child.stdin.end();
  });
}
