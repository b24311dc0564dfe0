/** Uncertainty-versus-value-error scatter with a Spearman annotation. */

import { CsvTable } from "./io.js";
import { spearman } from "./stats.js";
import { PALETTE, Scene, makeScale } from "./svg.js";

export interface ScatterResult {
  svg: string;
  spearman: number;
}

export function renderScatter(
  table: CsvTable,
  estimator: string,
  manifestSpearman?: number,
): ScatterResult {
  const xs = table.columns.get(estimator);
  const ys = table.columns.get("abs_q_error");
  if (!xs || xs.length === 0) {
    throw new Error(`estimator column ${JSON.stringify(estimator)} is missing or empty`);
  }
  if (!ys || ys.length === 0) {
    throw new Error("abs_q_error column is missing or empty");
  }
  if (xs.some((v) => !Number.isFinite(v))) {
    throw new Error(`estimator column ${JSON.stringify(estimator)} holds non-finite values`);
  }

  const rho = spearman(xs, ys);
  if (manifestSpearman !== undefined && Math.abs(rho - manifestSpearman) > 1e-9) {
    throw new Error(
      `recomputed spearman ${rho} disagrees with the manifest value ${manifestSpearman}`,
    );
  }

  const scale = makeScale([Math.min(...xs), Math.max(...xs)], [Math.min(...ys), Math.max(...ys)]);
  const scene = new Scene(`uncertainty vs value-estimation error (${estimator})`);
  scene.axes(scale, `${estimator} uncertainty`, "absolute Q error");
  scene.dots(xs, ys, scale, PALETTE[0]);
  scene.label(70, 34, `spearman = ${rho.toFixed(6)}`, PALETTE[0]);
  return { svg: scene.render(), spearman: rho };
}
