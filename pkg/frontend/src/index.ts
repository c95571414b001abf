/**
 * TypeScript bindings for the segscore scoring engine.
 *
 * Pure delegation: every function shells out to the `segscore` CLI (the
 * `call` subcommand carries one library call as JSON over stdin), so the
 * numbers returned here are the engine's own - the shim computes nothing.
 * Validation failures surface as thrown Errors carrying the engine's
 * diagnostic string.
 */

import { spawnSync } from "node:child_process";

export interface ConfusionCounts {
  tp: number;
  fp: number;
  fn: number;
  tn?: number;
}

export interface SubjectMetrics {
  lesion_load: number;
  h: number;
  kappa: number;
  dsc: number;
  ndsc: number;
  precision: number;
  recall: number;
  p_ratio: number | null;
  n_ratio: number | null;
}

export interface BiasStats {
  rho: number | null;
  tau: number | null;
  slope: number | null;
  intercept: number | null;
  n: number;
  error: string | null;
}

export interface CohortReport {
  reference_r: number;
  threshold: number | null;
  per_subject: Array<{ id: string } & SubjectMetrics>;
  summary: Record<string, { mean_dsc: number | null; mean_ndsc: number | null }>;
  subsets: Record<string, string[]>;
  bias: { dsc: BiasStats; ndsc: BiasStats };
  load_histogram: { edges: number[]; counts: number[] } | null;
  skipped: Array<{ id: string; reason: string }>;
}

/** A dense 3D grid: nested arrays, or a flat buffer in C order plus dims. */
export type Grid3D =
  | number[][][]
  | { dims: [number, number, number]; data: ArrayLike<number> };

export interface RunnerOptions {
  /** Command vector launching the engine; default `python3 -m segscore`,
   * overridable via the SEGSCORE_PYTHON environment variable. */
  command?: string[];
}

export interface EvaluatePairOptions extends RunnerOptions {
  referenceR?: number;
  /** When set, `pred` is a probability grid binarized at this threshold. */
  threshold?: number;
  emptyConvention?: "both_empty_is_one" | "both_empty_is_error";
}

export interface EvaluateCohortOptions extends RunnerOptions {
  referenceR?: number;
  threshold?: number;
  bins?: number;
}

function engineCommand(opts?: RunnerOptions): string[] {
  if (opts?.command) return opts.command;
  const python = process.env.SEGSCORE_PYTHON ?? "python3";
  return [python, "-m", "segscore"];
}

function runEngine(args: string[], stdin: string | undefined,
                   opts?: RunnerOptions): string {
  const [exe, ...base] = engineCommand(opts);
  const result = spawnSync(exe, [...base, ...args], {
    input: stdin,
    encoding: "utf8",
    maxBuffer: 256 * 1024 * 1024,
  });
  if (result.error) throw result.error;
  if (result.status !== 0) {
    const diagnostic = result.stderr.trim() || `exit code ${result.status}`;
    throw new Error(`segscore ${args[0]} failed: ${diagnostic}`);
  }
  return result.stdout;
}

function call<T>(op: string, payload: unknown, opts?: RunnerOptions): T {
  return JSON.parse(runEngine(["call", op], JSON.stringify(payload), opts)) as T;
}

function callValue<T>(op: string, payload: unknown, opts?: RunnerOptions): T {
  return call<{ value: T }>(op, payload, opts).value;
}

function flatten(grid: Grid3D): { dims: [number, number, number]; data: number[] } {
  if (!Array.isArray(grid)) {
    return { dims: grid.dims, data: Array.from(grid.data) };
  }
  const dims: [number, number, number] = [
    grid.length,
    grid[0]?.length ?? 0,
    grid[0]?.[0]?.length ?? 0,
  ];
  const data: number[] = [];
  for (const plane of grid) {
    for (const row of plane) {
      for (const v of row) data.push(v);
    }
  }
  return { dims, data };
}

/** False-positive scaling factor `h * (1/r - 1)`. */
export function kappa(h: number, r: number, opts?: RunnerOptions): number {
  return callValue("kappa", { h, r }, opts);
}

/** Dice similarity coefficient from confusion counts. */
export function dsc(counts: ConfusionCounts, opts?: RunnerOptions): number {
  return callValue("dsc", { counts }, opts);
}

/** Normalised Dice from confusion counts, a class ratio, and a reference. */
export function ndsc(counts: ConfusionCounts, h: number, referenceR: number,
                     opts?: RunnerOptions): number {
  return callValue("ndsc", { counts, h, reference_r: referenceR }, opts);
}

export function precision(counts: ConfusionCounts, opts?: RunnerOptions): number {
  return callValue("precision", { counts }, opts);
}

export function recall(counts: ConfusionCounts, opts?: RunnerOptions): number {
  return callValue("recall", { counts }, opts);
}

/** Dice as the harmonic mean of precision and recall. */
export function dscFromPr(precisionValue: number, recallValue: number,
                          opts?: RunnerOptions): number {
  return callValue("dsc_from_pr",
                   { precision: precisionValue, recall: recallValue }, opts);
}

/** 1-based average ranks (ties share the mean of their rank span). */
export function ranks(values: number[], opts?: RunnerOptions): number[] {
  return callValue("ranks", { values }, opts);
}

/** Spearman's rho: Pearson correlation of the rank vectors. */
export function spearman(x: number[], y: number[], opts?: RunnerOptions): number {
  return callValue("spearman", { x, y }, opts);
}

/** Kendall's tau-b (tie-corrected). */
export function kendallTau(x: number[], y: number[], opts?: RunnerOptions): number {
  return callValue("kendall_tau", { x, y }, opts);
}

/** OLS fit of rank(y) against rank(x). */
export function rankRegression(x: number[], y: number[], opts?: RunnerOptions):
    { slope: number; intercept: number } {
  return callValue("rank_regression", { x, y }, opts);
}

/** Full per-subject scoring of a prediction grid against a ground truth. */
export function evaluatePair(gt: Grid3D, pred: Grid3D,
                             opts?: EvaluatePairOptions): SubjectMetrics {
  const g = flatten(gt);
  const p = flatten(pred);
  const payload: Record<string, unknown> = {
    gt: g.data,
    pred: p.data,
    dims: g.dims,
  };
  if (opts?.referenceR !== undefined) payload.reference_r = opts.referenceR;
  if (opts?.threshold !== undefined) payload.threshold = opts.threshold;
  if (opts?.emptyConvention) payload.empty_convention = opts.emptyConvention;
  return call<SubjectMetrics>("evaluate_pair", payload, opts);
}

/** Cohort bias report for a manifest CSV; identical to the CLI's JSON. */
export function evaluateCohort(manifestPath: string,
                               opts?: EvaluateCohortOptions): CohortReport {
  const args = ["cohort", "--manifest", manifestPath, "--format", "json",
                "--quiet"];
  if (opts?.referenceR !== undefined) args.push("--ref", String(opts.referenceR));
  if (opts?.threshold !== undefined) args.push("--threshold", String(opts.threshold));
  if (opts?.bins !== undefined) args.push("--bins", String(opts.bins));
  return JSON.parse(runEngine(args, undefined, opts)) as CohortReport;
}
