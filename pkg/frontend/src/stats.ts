/** Curve aggregation and rank statistics. */

export function movingAverage(values: number[], window: number): number[] {
  if (window < 1 || !Number.isInteger(window)) {
    throw new Error(`smoothing window must be a positive integer, got ${window}`);
  }
  if (window === 1) return values.slice();
  // uniform centered window, shrinking symmetrically at the edges
  const half = Math.floor(window / 2);
  return values.map((_, i) => {
    const radius = Math.min(half, i, values.length - 1 - i);
    let total = 0;
    for (let j = i - radius; j <= i + radius; j++) total += values[j];
    return total / (2 * radius + 1);
  });
}

export function interpolate(xs: number[], ys: number[], grid: number[]): number[] {
  return grid.map((x) => {
    if (x <= xs[0]) return ys[0];
    if (x >= xs[xs.length - 1]) return ys[ys.length - 1];
    let hi = 1;
    while (xs[hi] < x) hi++;
    const lo = hi - 1;
    const t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    return ys[lo] + t * (ys[hi] - ys[lo]);
  });
}

export interface AggregatedCurve {
  grid: number[];
  mean: number[];
  std: number[];
  runs: number;
}

/** Align runs on the coarsest env-step grid, then mean/std across runs per point. */
export function aggregateRuns(
  runs: { envSteps: number[]; evalMean: number[] }[],
  warn: (msg: string) => void,
): AggregatedCurve {
  if (runs.length === 0) throw new Error("no runs to aggregate");
  let coarsest = runs[0].envSteps;
  for (const run of runs) {
    if (run.envSteps.length < coarsest.length) coarsest = run.envSteps;
  }
  const grids = runs.map((r) => r.envSteps.join(","));
  if (new Set(grids).size > 1) {
    warn(`step grids differ across runs; resampling to the coarsest grid (${coarsest.length} points)`);
  }
  const aligned = runs.map((r) =>
    r.envSteps.join(",") === coarsest.join(",") ? r.evalMean : interpolate(r.envSteps, r.evalMean, coarsest),
  );
  const mean = coarsest.map((_, i) => aligned.reduce((acc, ys) => acc + ys[i], 0) / aligned.length);
  const std = coarsest.map((_, i) => {
    const mu = mean[i];
    const varSum = aligned.reduce((acc, ys) => acc + (ys[i] - mu) ** 2, 0);
    return Math.sqrt(varSum / aligned.length);
  });
  return { grid: coarsest, mean, std, runs: runs.length };
}

function ranks(values: number[]): number[] {
  const order = values
    .map((v, i) => [v, i] as const)
    .sort((a, b) => a[0] - b[0] || a[1] - b[1]);
  const out = new Array<number>(values.length);
  let i = 0;
  while (i < order.length) {
    let j = i;
    while (j + 1 < order.length && order[j + 1][0] === order[i][0]) j++;
    const rank = (i + j) / 2;
    for (let k = i; k <= j; k++) out[order[k][1]] = rank;
    i = j + 1;
  }
  return out;
}

/** Spearman rank correlation with average ranks for ties. */
export function spearman(x: number[], y: number[]): number {
  if (x.length !== y.length || x.length === 0) {
    throw new Error("spearman needs two equal-length non-empty arrays");
  }
  const rx = ranks(x);
  const ry = ranks(y);
  const mx = rx.reduce((a, b) => a + b, 0) / rx.length;
  const my = ry.reduce((a, b) => a + b, 0) / ry.length;
  let num = 0;
  let dx = 0;
  let dy = 0;
  for (let i = 0; i < rx.length; i++) {
    const ax = rx[i] - mx;
    const ay = ry[i] - my;
    num += ax * ay;
    dx += ax * ax;
    dy += ay * ay;
  }
  const denom = Math.sqrt(dx * dy);
  return denom === 0 ? 0 : num / denom;
}
