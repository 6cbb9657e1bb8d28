/**
 * Minimal deterministic SVG scene builder.
 *
 * Output is a pure function of the drawing calls: coordinates are formatted
 * with fixed precision and no timestamps or generated ids ever enter the
 * document, so golden-file comparisons are byte-stable.
 */

const FONT = "font-family=\"Helvetica, Arial, sans-serif\"";

export function fmt(value: number, digits = 2): string {
  if (!Number.isFinite(value)) return "0";
  const s = value.toFixed(digits);
  return s === "-0" || s === "-0.00" || s === "-0.0" ? s.slice(1) : s;
}

export class Svg {
  private parts: string[] = [];

  constructor(readonly width: number, readonly height: number) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
        `viewBox="0 0 ${width} ${height}">`,
      `<rect width="${width}" height="${height}" fill="white"/>`,
    );
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width = 1, dash = ""): void {
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ` +
        `stroke="${stroke}" stroke-width="${width}"${d}/>`,
    );
  }

  circle(cx: number, cy: number, r: number, fill: string): void {
    this.parts.push(`<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="${r}" fill="${fill}"/>`);
  }

  rect(x: number, y: number, w: number, h: number, fill: string, opacity = 1): void {
    const o = opacity < 1 ? ` fill-opacity="${opacity}"` : "";
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" fill="${fill}"${o}/>`,
    );
  }

  text(x: number, y: number, content: string, size = 11, anchor = "start", rotate = 0): void {
    const transform = rotate ? ` transform="rotate(${rotate} ${fmt(x)} ${fmt(y)})"` : "";
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-size="${size}" text-anchor="${anchor}" ` +
        `${FONT} fill="#222"${transform}>${escapeXml(content)}</text>`,
    );
  }

  render(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** Linear scale mapping [lo, hi] onto pixel range [a, b]. */
export function scale(lo: number, hi: number, a: number, b: number): (v: number) => number {
  const span = hi - lo || 1;
  return (v: number) => a + ((v - lo) / span) * (b - a);
}

/** Round tick positions covering [lo, hi] at a 1/2/5 step. */
export function ticks(lo: number, hi: number, count = 5): number[] {
  const span = hi - lo;
  if (!(span > 0)) return [lo];
  const raw = span / count;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= count + 1) ?? 10 * mag;
  const start = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-9 * span; v += step) out.push(Math.abs(v) < 1e-12 ? 0 : v);
  return out;
}

/** Powers of ten covering [lo, hi] (both positive), for log axes. */
export function decadeTicks(lo: number, hi: number): number[] {
  const out: number[] = [];
  for (let e = Math.ceil(Math.log10(lo) - 1e-9); Math.pow(10, e) <= hi * (1 + 1e-9); e++) {
    out.push(Math.pow(10, e));
  }
  return out.length ? out : [lo];
}

export function tickLabel(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) {
    const e = Math.floor(Math.log10(a));
    const mantissa = v / Math.pow(10, e);
    const m = fmt(mantissa, Math.abs(mantissa - Math.round(mantissa)) < 1e-9 ? 0 : 1);
    return `${m}e${e}`;
  }
  return a >= 100 ? fmt(v, 0) : fmt(v, a < 1 ? 3 : a < 10 ? 2 : 1).replace(/\.?0+$/, "");
}
