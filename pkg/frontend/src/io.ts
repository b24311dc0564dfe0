/** Readers for the training harness's output files: run directories holding
 * run_manifest.json + metrics.jsonl, and the diagnostics CSVs. All readers
 * are strictly read-only. */

import * as fs from "node:fs";
import * as path from "node:path";

export interface RunSeries {
  envSteps: number[];
  evalMean: number[];
  evalStd: number[];
  variant: string;
  seed: number;
}

export interface CsvTable {
  headers: string[];
  columns: Map<string, number[]>;
  rows: number;
}

export function readRunDir(dir: string): RunSeries {
  const manifestPath = path.join(dir, "run_manifest.json");
  const metricsPath = path.join(dir, "metrics.jsonl");
  if (!fs.existsSync(manifestPath)) {
    throw new Error(`not a run directory (missing run_manifest.json): ${dir}`);
  }
  const manifest = JSON.parse(fs.readFileSync(manifestPath, "utf8"));
  const variant: string = manifest.variant ?? manifest.config?.variant ?? "unknown";
  const seed: number = manifest.config?.seed ?? -1;

  const envSteps: number[] = [];
  const evalMean: number[] = [];
  const evalStd: number[] = [];
  const lines = fs.readFileSync(metricsPath, "utf8").trim().split("\n");
  let prevStep = -Infinity;
  for (const line of lines) {
    if (!line) continue;
    const record = JSON.parse(line);
    if (record.eval_return_mean === null || record.eval_return_mean === undefined) continue;
    if (typeof record.env_steps !== "number" || record.env_steps <= prevStep) {
      throw new Error(`metrics in ${dir} are not strictly increasing in env_steps`);
    }
    prevStep = record.env_steps;
    envSteps.push(record.env_steps);
    evalMean.push(record.eval_return_mean);
    evalStd.push(record.eval_return_std ?? 0);
  }
  if (envSteps.length === 0) {
    throw new Error(`no evaluation records in ${metricsPath}`);
  }
  return { envSteps, evalMean, evalStd, variant, seed };
}

export function readCsv(file: string): CsvTable {
  const text = fs.readFileSync(file, "utf8").trim();
  const lines = text.split("\n");
  if (lines.length < 1 || lines[0].trim() === "") {
    throw new Error(`empty csv: ${file}`);
  }
  const headers = lines[0].split(",").map((h) => h.trim());
  const columns = new Map<string, number[]>(headers.map((h) => [h, []]));
  for (const line of lines.slice(1)) {
    const cells = line.split(",");
    if (cells.length !== headers.length) {
      throw new Error(`ragged csv row in ${file}: expected ${headers.length} cells, got ${cells.length}`);
    }
    cells.forEach((cell, i) => columns.get(headers[i])!.push(Number(cell)));
  }
  return { headers, columns, rows: lines.length - 1 };
}

export function readSummary(file: string): { spearman: Record<string, number> } {
  const data = JSON.parse(fs.readFileSync(file, "utf8"));
  if (!data.spearman || typeof data.spearman !== "object") {
    throw new Error(`${file} has no spearman section`);
  }
  return data;
}
