/**
 * Node bindings for the kaeval kernel-analysis core.
 *
 * The core is driven through its stable external interfaces: the raw
 * little-endian float64 feature format with JSON sidecar, the label CSV, and
 * the CLI's JSON/CSV outputs. Caller buffers are written to the interchange
 * file as-is and never mutated. Error text produced by the core is rethrown
 * verbatim.
 */

import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

export type Encoding = "standardized" | "signed" | "binary";

export interface CoreOptions {
  /** Interpreter used to run the core (default: $KAEVAL_PYTHON, then python3). */
  python?: string;
  quantiles?: number[];
  encoding?: Encoding;
}

export interface EvaluateOptions extends CoreOptions {
  center?: boolean;
}

export interface EvaluateResult {
  auc: number;
  sigmas: number[];
  n: number;
  k: number;
  /** Integer dimensions d = 0..D. */
  d: number[];
  /** Normalized complexity d / D. */
  complexity: number[];
  loss: number[];
  accuracy: number[];
  argminSigma: number[];
}

export interface ProtocolOptions extends CoreOptions {
  subsets?: number;
  fraction?: number;
  seed?: number;
  /** Variation tag recorded in the report (default "Unspecified"). */
  level?: string;
}

export interface LevelReport {
  level: string;
  auc_mean: number;
  auc_std: number;
  auc_per_subset: number[];
  envelope: { grid: number[]; min: number[]; max: number[]; mean: number[] };
  subset_size: number;
  n: number;
  k: number;
}

export interface ProtocolReport {
  levels: Record<string, LevelReport>;
  seed: number;
  quantiles: number[];
  n_subsets: number;
  fraction: number;
  encoding: string;
  config?: Record<string, unknown>;
}

export interface SaturationFit {
  a: number;
  b: number;
  c: number;
  dExp: number;
  rss: number;
  converged: boolean;
}

function pythonBin(opts?: CoreOptions): string {
  return opts?.python ?? process.env.KAEVAL_PYTHON ?? "python3";
}

function runCore(python: string, args: string[]): string {
  const proc = spawnSync(python, ["-m", "kaeval", ...args], {
    encoding: "utf-8",
    maxBuffer: 256 * 1024 * 1024,
  });
  if (proc.error) {
    throw new Error(`failed to launch ${python}: ${proc.error.message}`);
  }
  if (proc.status !== 0) {
    const detail = (proc.stderr || proc.stdout || "").trim();
    throw new Error(detail || `kaeval exited with code ${proc.status}`);
  }
  return proc.stdout;
}

function checkBuffer(features: Float64Array, n: number, p: number, labels: string[]): void {
  if (!Number.isInteger(n) || !Number.isInteger(p) || n < 1 || p < 1) {
    throw new RangeError(`invalid shape (${n}, ${p})`);
  }
  if (features.length !== n * p) {
    throw new RangeError(
      `buffer holds ${features.length} values but shape (${n}, ${p}) needs ${n * p}`,
    );
  }
  if (labels.length !== n) {
    throw new RangeError(`${labels.length} labels for ${n} rows`);
  }
}

function featureBytes(features: Float64Array): Buffer {
  if (os.endianness() === "LE") {
    return Buffer.from(features.buffer, features.byteOffset, features.byteLength);
  }
  const out = Buffer.allocUnsafe(features.byteLength);
  for (let i = 0; i < features.length; i++) {
    out.writeDoubleLE(features[i], i * 8);
  }
  return out;
}

function csvField(value: string): string {
  return /[",\n\r]/.test(value) ? `"${value.replace(/"/g, '""')}"` : value;
}

interface Workspace {
  dir: string;
  featurePath: string;
  labelPath: string;
  ids: string[];
}

function writeDataset(
  features: Float64Array,
  n: number,
  p: number,
  labels: string[],
): Workspace {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "kaeval-bindings-"));
  const ids = Array.from({ length: n }, (_, i) => `img_${String(i).padStart(6, "0")}`);
  const featurePath = path.join(dir, "features.f64");
  fs.writeFileSync(featurePath, featureBytes(features));
  fs.writeFileSync(
    path.join(dir, "features.json"),
    JSON.stringify({ rows: n, cols: p, dtype: "f64", order: "row-major", ids }),
  );
  const labelPath = path.join(dir, "labels.csv");
  const rows = ["image_id,class"];
  for (let i = 0; i < n; i++) {
    rows.push(`${ids[i]},${csvField(labels[i])}`);
  }
  fs.writeFileSync(labelPath, rows.join("\n") + "\n");
  return { dir, featurePath, labelPath, ids };
}

function cleanup(dir: string): void {
  fs.rmSync(dir, { recursive: true, force: true });
}

function quantileArgs(opts?: CoreOptions): string[] {
  const args: string[] = [];
  if (opts?.quantiles !== undefined) {
    args.push("--quantiles", opts.quantiles.join(","));
  }
  if (opts?.encoding !== undefined) {
    args.push("--encoding", opts.encoding);
  }
  return args;
}

function parseCurveCsv(text: string): Pick<
  EvaluateResult,
  "d" | "complexity" | "loss" | "accuracy" | "argminSigma"
> {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0 && !l.startsWith("#"));
  const header = lines[0];
  if (header !== "d,d_over_D,e_d,accuracy,argmin_sigma") {
    throw new Error(`unexpected curve header: ${header}`);
  }
  const d: number[] = [];
  const complexity: number[] = [];
  const loss: number[] = [];
  const accuracy: number[] = [];
  const argminSigma: number[] = [];
  for (const line of lines.slice(1)) {
    const cells = line.split(",");
    d.push(Number(cells[0]));
    complexity.push(Number(cells[1]));
    loss.push(Number(cells[2]));
    accuracy.push(Number(cells[3]));
    argminSigma.push(Number(cells[4]));
  }
  return { d, complexity, loss, accuracy, argminSigma };
}

/**
 * Score a feature matrix: the full accuracy-complexity curve plus its AUC.
 * Numerically identical to running the CLI on the same data.
 */
export function evaluate(
  features: Float64Array,
  n: number,
  p: number,
  labels: string[],
  opts?: EvaluateOptions,
): EvaluateResult {
  checkBuffer(features, n, p, labels);
  const ws = writeDataset(features, n, p, labels);
  try {
    const outDir = path.join(ws.dir, "out");
    const args = [
      "eval",
      "--features", ws.featurePath,
      "--labels", ws.labelPath,
      "--format", "binary",
      "--out", outDir,
      ...quantileArgs(opts),
    ];
    if (opts?.center) {
      args.push("--center");
    }
    runCore(pythonBin(opts), args);
    const summary = JSON.parse(
      fs.readFileSync(path.join(outDir, "summary.json"), "utf-8"),
    );
    const curve = parseCurveCsv(fs.readFileSync(path.join(outDir, "curve.csv"), "utf-8"));
    return {
      auc: summary.auc,
      sigmas: summary.sigmas,
      n: summary.n,
      k: summary.k,
      ...curve,
    };
  } finally {
    cleanup(ws.dir);
  }
}

/**
 * Run the seeded subset protocol; the result mirrors the core's report JSON
 * and round-trips losslessly through JSON.
 */
export function runProtocol(
  features: Float64Array,
  n: number,
  p: number,
  labels: string[],
  opts?: ProtocolOptions,
): ProtocolReport {
  checkBuffer(features, n, p, labels);
  const ws = writeDataset(features, n, p, labels);
  try {
    const level = opts?.level ?? "Unspecified";
    const manifestPath = path.join(ws.dir, "manifest.json");
    fs.writeFileSync(
      manifestPath,
      JSON.stringify({
        name: "bindings",
        labels: "labels.csv",
        entries: [{ level, path: "features.f64", format: "binary" }],
      }),
    );
    const reportPath = path.join(ws.dir, "report.json");
    const args = [
      "protocol",
      "--manifest", manifestPath,
      "--out", reportPath,
      ...quantileArgs(opts),
    ];
    if (opts?.subsets !== undefined) {
      args.push("--subsets", String(opts.subsets));
    }
    if (opts?.fraction !== undefined) {
      args.push("--fraction", String(opts.fraction));
    }
    if (opts?.seed !== undefined) {
      args.push("--seed", String(opts.seed));
    }
    runCore(pythonBin(opts), args);
    return JSON.parse(fs.readFileSync(reportPath, "utf-8")) as ProtocolReport;
  } finally {
    cleanup(ws.dir);
  }
}

/**
 * Fit AUC(t) = a + b * exp(-c * t^d) to (site count, AUC) points.
 */
export function fitSaturation(
  t: number[],
  auc: number[],
  opts?: CoreOptions,
): SaturationFit {
  if (t.length !== auc.length) {
    throw new RangeError(`${t.length} site counts for ${auc.length} AUC values`);
  }
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "kaeval-bindings-"));
  try {
    const pointsPath = path.join(dir, "points.csv");
    const rows = ["t,auc"];
    for (let i = 0; i < t.length; i++) {
      rows.push(`${t[i]},${auc[i]}`);
    }
    fs.writeFileSync(pointsPath, rows.join("\n") + "\n");
    const outDir = path.join(dir, "out");
    runCore(pythonBin(opts), ["extrapolate", "--points", pointsPath, "--out", outDir]);
    const fit = JSON.parse(fs.readFileSync(path.join(outDir, "fit.json"), "utf-8"));
    return {
      a: fit.a,
      b: fit.b,
      c: fit.c,
      dExp: fit.d_exp,
      rss: fit.rss,
      converged: fit.converged,
    };
  } finally {
    cleanup(dir);
  }
}
