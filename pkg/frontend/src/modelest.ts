/** Per-model Q estimates versus the true Monte-Carlo return. */

import { CsvTable } from "./io.js";
import { PALETTE, Scene, makeScale } from "./svg.js";

export function renderModelEstimates(table: CsvTable): string {
  const headCols = table.headers.filter((h) => h.startsWith("q_head_"));
  const truth = table.columns.get("mc_return");
  if (headCols.length === 0 || !truth || truth.length === 0) {
    throw new Error("expected q_head_* columns and a mc_return column");
  }

  let lo = Infinity;
  let hi = -Infinity;
  for (const col of headCols) {
    for (const v of table.columns.get(col)!) {
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
  }
  for (const v of truth) {
    lo = Math.min(lo, v);
    hi = Math.max(hi, v);
  }
  const pad = (hi - lo) * 0.05 || 1;
  const scale = makeScale([lo - pad, hi + pad], [lo - pad, hi + pad]);

  const scene = new Scene(`per-model Q estimates vs true return (${headCols.length} heads)`);
  scene.axes(scale, "true return", "head estimate");
  scene.polyline([lo - pad, hi + pad], [lo - pad, hi + pad], scale, "#999999");
  headCols.forEach((col, i) => {
    scene.dots(truth, table.columns.get(col)!, scale, PALETTE[i % PALETTE.length], 2);
  });
  scene.label(70, 34, `${truth.length} evaluation points, identity line in grey`);
  return scene.render();
}
