/** Deterministic SVG scene building: same inputs, same bytes. */

export const WIDTH = 640;
export const HEIGHT = 420;
export const MARGIN = { left: 64, right: 20, top: 36, bottom: 48 };

export const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
  "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f",
];

export interface Scale {
  toX(v: number): number;
  toY(v: number): number;
  xDomain: [number, number];
  yDomain: [number, number];
}

function fmt(v: number): string {
  // fixed-notation, trimmed trailing zeros: deterministic across runs
  if (!Number.isFinite(v)) return "0";
  const s = v.toFixed(4);
  return s.replace(/\.?0+$/, "") || "0";
}

export function makeScale(xDomain: [number, number], yDomain: [number, number]): Scale {
  const [x0, x1] = xDomain[0] === xDomain[1] ? [xDomain[0] - 1, xDomain[1] + 1] : xDomain;
  const [y0, y1] = yDomain[0] === yDomain[1] ? [yDomain[0] - 1, yDomain[1] + 1] : yDomain;
  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  return {
    toX: (v) => MARGIN.left + ((v - x0) / (x1 - x0)) * plotW,
    toY: (v) => MARGIN.top + plotH - ((v - y0) / (y1 - y0)) * plotH,
    xDomain: [x0, x1],
    yDomain: [y0, y1],
  };
}

export function ticks(lo: number, hi: number, count = 5): number[] {
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const err = (span / count) / step;
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const tick = step * mult;
  const start = Math.ceil(lo / tick) * tick;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-12; v += tick) out.push(Math.round(v / tick) * tick);
  return out;
}

export class Scene {
  private parts: string[] = [];

  constructor(title: string) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`,
      `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`,
      `<text x="${WIDTH / 2}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">${escapeXml(title)}</text>`,
    );
  }

  axes(scale: Scale, xLabel: string, yLabel: string): void {
    const x0 = MARGIN.left;
    const x1 = WIDTH - MARGIN.right;
    const y0 = MARGIN.top;
    const y1 = HEIGHT - MARGIN.bottom;
    this.parts.push(`<line x1="${x0}" y1="${y1}" x2="${x1}" y2="${y1}" stroke="black"/>`);
    this.parts.push(`<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="black"/>`);
    for (const t of ticks(scale.xDomain[0], scale.xDomain[1])) {
      const px = fmt(scale.toX(t));
      this.parts.push(`<line x1="${px}" y1="${y1}" x2="${px}" y2="${y1 + 5}" stroke="black"/>`);
      this.parts.push(
        `<text x="${px}" y="${y1 + 18}" text-anchor="middle" font-family="sans-serif" font-size="10">${fmt(t)}</text>`,
      );
    }
    for (const t of ticks(scale.yDomain[0], scale.yDomain[1])) {
      const py = fmt(scale.toY(t));
      this.parts.push(`<line x1="${x0 - 5}" y1="${py}" x2="${x0}" y2="${py}" stroke="black"/>`);
      this.parts.push(
        `<text x="${x0 - 8}" y="${py}" text-anchor="end" dominant-baseline="middle" font-family="sans-serif" font-size="10">${fmt(t)}</text>`,
      );
    }
    this.parts.push(
      `<text x="${(x0 + x1) / 2}" y="${HEIGHT - 10}" text-anchor="middle" font-family="sans-serif" font-size="12">${escapeXml(xLabel)}</text>`,
    );
    this.parts.push(
      `<text x="16" y="${(y0 + y1) / 2}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 ${(y0 + y1) / 2})">${escapeXml(yLabel)}</text>`,
    );
  }

  polyline(xs: number[], ys: number[], scale: Scale, color: string): void {
    const pts = xs.map((x, i) => `${fmt(scale.toX(x))},${fmt(scale.toY(ys[i]))}`).join(" ");
    this.parts.push(`<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="1.5"/>`);
  }

  band(xs: number[], upper: number[], lower: number[], scale: Scale, color: string): void {
    const fwd = xs.map((x, i) => `${fmt(scale.toX(x))},${fmt(scale.toY(upper[i]))}`);
    const back = xs
      .map((x, i) => `${fmt(scale.toX(x))},${fmt(scale.toY(lower[i]))}`)
      .reverse();
    this.parts.push(
      `<polygon points="${fwd.concat(back).join(" ")}" fill="${color}" fill-opacity="0.2" stroke="none"/>`,
    );
  }

  dots(xs: number[], ys: number[], scale: Scale, color: string, r = 2.5): void {
    for (let i = 0; i < xs.length; i++) {
      this.parts.push(
        `<circle cx="${fmt(scale.toX(xs[i]))}" cy="${fmt(scale.toY(ys[i]))}" r="${r}" fill="${color}" fill-opacity="0.6"/>`,
      );
    }
  }

  label(x: number, y: number, text: string, color = "black"): void {
    this.parts.push(
      `<text x="${x}" y="${y}" font-family="sans-serif" font-size="11" fill="${color}">${escapeXml(text)}</text>`,
    );
  }

  render(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}
