/** Learning curves: mean per variant with seed-std shading. */

import { RunSeries } from "./io.js";
import { aggregateRuns, movingAverage } from "./stats.js";
import { PALETTE, Scene, makeScale } from "./svg.js";

export function renderCurves(runs: RunSeries[], window: number, warn: (m: string) => void): string {
  if (runs.length === 0) throw new Error("at least one run is required");

  const byVariant = new Map<string, RunSeries[]>();
  for (const run of runs) {
    const bucket = byVariant.get(run.variant) ?? [];
    bucket.push(run);
    byVariant.set(run.variant, bucket);
  }
  const variants = [...byVariant.keys()].sort();

  const curves = variants.map((name) => {
    const agg = aggregateRuns(byVariant.get(name)!, warn);
    return {
      name,
      grid: agg.grid,
      mean: movingAverage(agg.mean, window),
      std: movingAverage(agg.std, window),
      runs: agg.runs,
    };
  });

  let xMax = -Infinity;
  let yMin = Infinity;
  let yMax = -Infinity;
  let xMin = Infinity;
  for (const c of curves) {
    xMin = Math.min(xMin, c.grid[0]);
    xMax = Math.max(xMax, c.grid[c.grid.length - 1]);
    for (let i = 0; i < c.grid.length; i++) {
      yMin = Math.min(yMin, c.mean[i] - c.std[i]);
      yMax = Math.max(yMax, c.mean[i] + c.std[i]);
    }
  }
  const pad = (yMax - yMin) * 0.08 || 1;
  const scale = makeScale([xMin, xMax], [yMin - pad, yMax + pad]);

  const scene = new Scene(`evaluation return (smoothing window ${window})`);
  scene.axes(scale, "environment steps", "eval return");
  curves.forEach((c, i) => {
    const color = PALETTE[i % PALETTE.length];
    if (c.runs > 1) {
      const upper = c.mean.map((m, j) => m + c.std[j]);
      const lower = c.mean.map((m, j) => m - c.std[j]);
      scene.band(c.grid, upper, lower, scale, color);
    }
    scene.polyline(c.grid, c.mean, scale, color);
    scene.label(70, 34 + 14 * i, `${c.name} (${c.runs} run${c.runs > 1 ? "s" : ""})`, color);
  });
  return scene.render();
}
