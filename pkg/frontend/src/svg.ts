/** Minimal SVG scatter/line figure assembly: fixed frame, linear or log
 * axes with round-number ticks, polylines, markers, and a text banner for
 * fit annotations. */

export interface Series {
  xs: number[];
  ys: number[];
  label?: string;
  line?: boolean;
  markers?: boolean;
}

export interface Frame {
  title: string;
  xlabel: string;
  ylabel: string;
  logX?: boolean;
  logY?: boolean;
  annotation?: string;
}

const W = 720;
const H = 480;
const M = { left: 72, right: 24, top: 48, bottom: 56 };
const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
  "#8c564b", "#17becf", "#7f7f7f"];

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function ticks(lo: number, hi: number, log: boolean): number[] {
  if (log) {
    const out: number[] = [];
    for (let d = Math.floor(Math.log10(lo)); d <= Math.ceil(Math.log10(hi)); d++) {
      const v = 10 ** d;
      if (v >= lo / 1.001 && v <= hi * 1.001) out.push(v);
    }
    return out.length >= 2 ? out : [lo, hi];
  }
  const span = hi - lo || 1;
  const step = 10 ** Math.floor(Math.log10(span / 4));
  const mult = span / step > 20 ? 5 : span / step > 8 ? 2 : 1;
  const s = step * mult;
  const out: number[] = [];
  for (let v = Math.ceil(lo / s) * s; v <= hi + s * 1e-9; v += s) out.push(v);
  return out;
}

function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(0);
  return String(Math.round(v * 1e6) / 1e6);
}

export function renderSvg(series: Series[], frame: Frame): string {
  const allX = series.flatMap((s) => s.xs);
  const allY = series.flatMap((s) => s.ys);
  const fin = (v: number) => Number.isFinite(v) && (!frame.logY || v > 0);
  const xs = allX.filter((v) => Number.isFinite(v) && (!frame.logX || v > 0));
  const ys = allY.filter(fin);
  if (xs.length === 0 || ys.length === 0) {
    throw new Error("nothing to draw: no finite data points");
  }
  let xLo = Math.min(...xs);
  let xHi = Math.max(...xs);
  let yLo = Math.min(...ys);
  let yHi = Math.max(...ys);
  if (xLo === xHi) [xLo, xHi] = [xLo - 1, xHi + 1];
  if (yLo === yHi) [yLo, yHi] = frame.logY
    ? [yLo / 2, yHi * 2] : [yLo - 1, yHi + 1];

  const tx = (v: number) => {
    const f = frame.logX
      ? (Math.log(v) - Math.log(xLo)) / (Math.log(xHi) - Math.log(xLo))
      : (v - xLo) / (xHi - xLo);
    return M.left + f * (W - M.left - M.right);
  };
  const ty = (v: number) => {
    const f = frame.logY
      ? (Math.log(v) - Math.log(yLo)) / (Math.log(yHi) - Math.log(yLo))
      : (v - yLo) / (yHi - yLo);
    return H - M.bottom - f * (H - M.top - M.bottom);
  };

  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}">`);
  parts.push(`<rect width="${W}" height="${H}" fill="white"/>`);
  parts.push(`<text x="${W / 2}" y="24" text-anchor="middle" font-size="16" font-family="sans-serif">${esc(frame.title)}</text>`);

  for (const v of ticks(xLo, xHi, !!frame.logX)) {
    const px = tx(v);
    parts.push(`<line x1="${px}" y1="${M.top}" x2="${px}" y2="${H - M.bottom}" stroke="#ddd"/>`);
    parts.push(`<text x="${px}" y="${H - M.bottom + 18}" text-anchor="middle" font-size="11" font-family="sans-serif">${fmtTick(v)}</text>`);
  }
  for (const v of ticks(yLo, yHi, !!frame.logY)) {
    const py = ty(v);
    parts.push(`<line x1="${M.left}" y1="${py}" x2="${W - M.right}" y2="${py}" stroke="#ddd"/>`);
    parts.push(`<text x="${M.left - 6}" y="${py + 4}" text-anchor="end" font-size="11" font-family="sans-serif">${fmtTick(v)}</text>`);
  }
  parts.push(`<rect x="${M.left}" y="${M.top}" width="${W - M.left - M.right}" height="${H - M.top - M.bottom}" fill="none" stroke="#333"/>`);
  parts.push(`<text x="${W / 2}" y="${H - 12}" text-anchor="middle" font-size="13" font-family="sans-serif">${esc(frame.xlabel)}</text>`);
  parts.push(`<text x="18" y="${H / 2}" text-anchor="middle" font-size="13" font-family="sans-serif" transform="rotate(-90 18 ${H / 2})">${esc(frame.ylabel)}</text>`);

  series.forEach((s, si) => {
    const color = PALETTE[si % PALETTE.length];
    const pts = s.xs
      .map((x, i) => [x, s.ys[i]] as const)
      .filter(([x, y]) => Number.isFinite(x) && Number.isFinite(y)
        && (!frame.logX || x > 0) && (!frame.logY || y > 0));
    if (pts.length === 0) return;
    if (s.line !== false) {
      const d = pts.map(([x, y]) => `${tx(x).toFixed(2)},${ty(y).toFixed(2)}`).join(" ");
      parts.push(`<polyline points="${d}" fill="none" stroke="${color}" stroke-width="1.5"/>`);
    }
    if (s.markers !== false) {
      for (const [x, y] of pts) {
        parts.push(`<circle cx="${tx(x).toFixed(2)}" cy="${ty(y).toFixed(2)}" r="3" fill="${color}"/>`);
      }
    }
    if (s.label) {
      parts.push(`<text x="${W - M.right - 8}" y="${M.top + 16 + 14 * si}" text-anchor="end" font-size="11" fill="${color}" font-family="sans-serif">${esc(s.label)}</text>`);
    }
  });

  if (frame.annotation) {
    parts.push(`<text x="${M.left + 8}" y="${M.top + 16}" font-size="12" font-family="monospace">${esc(frame.annotation)}</text>`);
  }
  parts.push("</svg>");
  return parts.join("\n");
}
