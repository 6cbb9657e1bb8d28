/**
 * Figure rendering for the sampler CLI's CSV artifacts.
 *
 * Three figure kinds, one per documented schema:
 *   qq: qq.csv (theoretical_q, empirical_q): scatter + identity reference
 *   drift: drift.csv (probe_norm, f_kind, mean, stderr, samples): log-log
 *           points with a least-squares fitted slope annotated
 *   hill: hill.csv (k, estimate): estimate vs k with the plateau band
 *           (median and spread of the largest-k half of the scan)
 *
 * Statistics computed upstream are never recomputed here; the only numerics
 * in this module are the coordinate transforms and the fitted line drawn
 * through already-published points.
 */

import { NumericTable, parseNumericCsv } from "./csv.js";
import { Svg, decadeTicks, fmt, scale, tickLabel, ticks } from "./svg.js";

export type FigureKind = "qq" | "drift" | "hill";

export interface FigureSpec {
  kind: FigureKind;
  input: string; // CSV bytes (text)
  title?: string;
}

const W = 480;
const H = 360;
const M = { left: 58, right: 16, top: 34, bottom: 44 };

interface Frame {
  x: (v: number) => number;
  y: (v: number) => number;
}

function frame(
  svg: Svg,
  xlo: number,
  xhi: number,
  ylo: number,
  yhi: number,
  opts: { xlabel: string; ylabel: string; xlog?: boolean; ylog?: boolean },
): Frame {
  const xs = scale(opts.xlog ? Math.log10(xlo) : xlo, opts.xlog ? Math.log10(xhi) : xhi, M.left, W - M.right);
  const ys = scale(opts.ylog ? Math.log10(ylo) : ylo, opts.ylog ? Math.log10(yhi) : yhi, H - M.bottom, M.top);
  const fx = (v: number) => xs(opts.xlog ? Math.log10(v) : v);
  const fy = (v: number) => ys(opts.ylog ? Math.log10(v) : v);

  svg.line(M.left, H - M.bottom, W - M.right, H - M.bottom, "#222");
  svg.line(M.left, M.top, M.left, H - M.bottom, "#222");
  const xticks = opts.xlog ? decadeTicks(xlo, xhi) : ticks(xlo, xhi);
  for (const t of xticks) {
    const px = fx(t);
    svg.line(px, H - M.bottom, px, H - M.bottom + 4, "#222");
    svg.text(px, H - M.bottom + 16, tickLabel(t), 10, "middle");
  }
  const yticks = opts.ylog ? decadeTicks(ylo, yhi) : ticks(ylo, yhi);
  for (const t of yticks) {
    const py = fy(t);
    svg.line(M.left - 4, py, M.left, py, "#222");
    svg.text(M.left - 7, py + 3, tickLabel(t), 10, "end");
  }
  svg.text((M.left + W - M.right) / 2, H - 8, opts.xlabel, 12, "middle");
  svg.text(14, (M.top + H - M.bottom) / 2, opts.ylabel, 12, "middle", -90);
  return { x: fx, y: fy };
}

function pad(lo: number, hi: number, f = 0.05): [number, number] {
  const span = hi - lo || Math.abs(hi) || 1;
  return [lo - f * span, hi + f * span];
}

function renderQq(table: NumericTable, title: string): string {
  const [theo, emp] = table.columns;
  const lo = Math.min(...theo, ...emp);
  const hi = Math.max(...theo, ...emp);
  const [plo, phi] = pad(lo, hi);
  const svg = new Svg(W, H);
  svg.text(W / 2, 20, title, 13, "middle");
  const f = frame(svg, plo, phi, plo, phi, {
    xlabel: "standard normal quantile",
    ylabel: "standardized average quantile",
  });
  svg.line(f.x(lo), f.y(lo), f.x(hi), f.y(hi), "#b22222", 1.2);
  for (let i = 0; i < table.rows; i++) {
    svg.circle(f.x(theo[i]), f.y(emp[i]), 2, "#1f4e8c");
  }
  return svg.render();
}

/** Ordinary least squares of log10|y| on log10 x over the published points. */
export function logLogSlope(xs: number[], ys: number[]): { slope: number; intercept: number } {
  const pts = xs
    .map((x, i) => [x, Math.abs(ys[i])] as const)
    .filter(([x, y]) => x > 0 && y > 0);
  const lx = pts.map(([x]) => Math.log10(x));
  const ly = pts.map(([, y]) => Math.log10(y));
  const n = lx.length;
  const mx = lx.reduce((a, b) => a + b, 0) / n;
  const my = ly.reduce((a, b) => a + b, 0) / n;
  let sxy = 0;
  let sxx = 0;
  for (let i = 0; i < n; i++) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  const slope = sxx > 0 ? sxy / sxx : 0;
  return { slope, intercept: my - slope * mx };
}

function renderDrift(table: NumericTable, title: string): string {
  const probe = table.columns[0];
  const mean = table.columns[2];
  const ys = mean.map(Math.abs);
  if (ys.some((y) => y === 0)) {
    throw new Error("drift means contain exact zeros; nothing to draw on a log scale");
  }
  const { slope, intercept } = logLogSlope(probe, mean);
  const xlo = Math.min(...probe);
  const xhi = Math.max(...probe);
  const ylo = Math.min(...ys);
  const yhi = Math.max(...ys);
  const svg = new Svg(W, H);
  svg.text(W / 2, 20, title, 13, "middle");
  const f = frame(svg, xlo / 1.3, xhi * 1.3, ylo / 1.6, yhi * 1.6, {
    xlabel: "probe |x|",
    ylabel: "|one-step drift|",
    xlog: true,
    ylog: true,
  });
  const fit = (x: number) => Math.pow(10, intercept + slope * Math.log10(x));
  svg.line(f.x(xlo), f.y(fit(xlo)), f.x(xhi), f.y(fit(xhi)), "#b22222", 1.2, "5,3");
  for (let i = 0; i < table.rows; i++) {
    svg.circle(f.x(probe[i]), f.y(ys[i]), 3, "#1f4e8c");
  }
  svg.text(W - M.right - 4, M.top + 14, `slope=${fmt(slope, 2)}`, 12, "end");
  return svg.render();
}

function renderHill(table: NumericTable, title: string): string {
  const [ks, est] = table.columns;
  const width = Math.max(2, Math.ceil(ks.length / 2));
  const window = est.slice(-width).slice().sort((a, b) => a - b);
  const median =
    window.length % 2
      ? window[(window.length - 1) / 2]
      : 0.5 * (window[window.length / 2 - 1] + window[window.length / 2]);
  const bandLo = window[0];
  const bandHi = window[window.length - 1];

  const ylo = Math.min(...est, bandLo);
  const yhi = Math.max(...est, bandHi);
  const [plo, phi] = pad(Math.min(ylo, 0), yhi, 0.08);
  const svg = new Svg(W, H);
  svg.text(W / 2, 20, title, 13, "middle");
  const f = frame(svg, Math.min(...ks), Math.max(...ks), plo, phi, {
    xlabel: "k (tail order statistics used)",
    ylabel: "tail-index estimate",
    xlog: true,
  });
  svg.rect(M.left, f.y(bandHi), W - M.right - M.left, f.y(bandLo) - f.y(bandHi), "#f0c674", 0.45);
  svg.line(M.left, f.y(median), W - M.right, f.y(median), "#b22222", 1.2, "5,3");
  for (let i = 0; i < table.rows; i++) {
    svg.circle(f.x(ks[i]), f.y(est[i]), 3, "#1f4e8c");
    if (i > 0) {
      svg.line(f.x(ks[i - 1]), f.y(est[i - 1]), f.x(ks[i]), f.y(est[i]), "#1f4e8c", 1);
    }
  }
  svg.text(W - M.right - 4, M.top + 14, `plateau=${fmt(median, 2)}`, 12, "end");
  return svg.render();
}

const SCHEMAS: Record<FigureKind, string[]> = {
  qq: ["theoretical_q", "empirical_q"],
  drift: ["probe_norm", "f_kind", "mean", "stderr", "samples"],
  hill: ["k", "estimate"],
};

const DEFAULT_TITLES: Record<FigureKind, string> = {
  qq: "QQ plot of standardized ergodic averages",
  drift: "one-step drift vs probe norm",
  hill: "Hill estimate vs k",
};

/** Render a figure to SVG text; throws CsvError/Error on malformed input. */
export function render(spec: FigureSpec): string {
  const schema = SCHEMAS[spec.kind];
  if (!schema) {
    throw new Error(`unknown figure kind '${spec.kind}'`);
  }
  const expected =
    spec.kind === "drift"
      ? parseDriftTable(spec.input)
      : parseNumericCsv(spec.input, schema);
  return spec.kind === "qq"
    ? renderQq(expected, spec.title ?? DEFAULT_TITLES.qq)
    : spec.kind === "drift"
      ? renderDrift(expected, spec.title ?? DEFAULT_TITLES.drift)
      : renderHill(expected, spec.title ?? DEFAULT_TITLES.hill);
}

/** drift.csv carries one text column (f_kind); map it to NaN-safe numeric form. */
function parseDriftTable(text: string): NumericTable {
  const probeOnly = text
    .split(/\r\n|\n/)
    .map((line, i) => {
      if (i === 0 || line.trim() === "") return line;
      const cells = line.split(",");
      if (cells.length === 5) cells[1] = "0"; // f_kind label is not numeric
      return cells.join(",");
    })
    .join("\n");
  return parseNumericCsv(probeOnly, SCHEMAS.drift);
}
