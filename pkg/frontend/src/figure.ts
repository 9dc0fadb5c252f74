/** Figure specifications and the renderer: a pure function from CSV/JSON
 * artifacts to an SVG string plus its fitted-slope annotation.  Nothing
 * here recomputes any mathematics; the inputs are read as emitted by the
 * experiment runner. */

import { readFileSync } from "node:fs";
import { CsvError, numericColumn, parseCsv, Table } from "./csv.js";
import { Fit, leastSquares, logLogFit } from "./regression.js";
import { Frame, renderSvg, Series } from "./svg.js";

export type FigureKind =
  | "loglog-fit"
  | "block-scaling"
  | "residual-history"
  | "norm-vs-time";

export interface FigureSpec {
  kind: FigureKind;
  input: string;
  output: string;
  title?: string;
  xlabel?: string;
  ylabel?: string;
  /** column names; defaults depend on the kind */
  x?: string;
  y?: string;
  /** grouping column for norm-vs-time (one line per distinct value) */
  series?: string;
  /** optional row filter: keep rows where column equals value */
  filter?: { column: string; equals: string | number };
  /** JSON pointer-ish path for residual-history inputs that are reports */
  jsonField?: string;
}

export interface Rendered {
  svg: string;
  fit: Fit | null;
  warnings: string[];
}

export class SpecError extends Error {}

function need<T>(v: T | undefined, what: string): T {
  if (v === undefined) throw new SpecError(`figure spec missing ${what}`);
  return v;
}

function loadTable(spec: FigureSpec): Table {
  const text = readFileSync(spec.input, "utf8");
  const table = parseCsv(text);
  if (!spec.filter) return table;
  const { column, equals } = spec.filter;
  if (!table.columns.includes(column)) {
    throw new CsvError(`missing column "${column}" used by the row filter`);
  }
  const rows = table.rows.filter((r) => r[column] === equals);
  if (rows.length === 0) {
    throw new CsvError(`row filter ${column} == ${equals} keeps no rows`);
  }
  return { columns: table.columns, rows };
}

function fitOrWarn(xs: number[], ys: number[], log: boolean,
                   warnings: string[]): Fit | null {
  if (xs.length < 2) {
    warnings.push("single data point: figure rendered without a fit");
    return null;
  }
  try {
    return log ? logLogFit(xs, ys) : leastSquares(xs, ys);
  } catch (err) {
    warnings.push(`fit skipped: ${(err as Error).message}`);
    return null;
  }
}

function annotate(fit: Fit | null): string | undefined {
  if (!fit) return undefined;
  return `slope=${fit.slope.toPrecision(12)}  R2=${fit.r2.toFixed(6)}`;
}

export function render(spec: FigureSpec): Rendered {
  const warnings: string[] = [];
  switch (spec.kind) {
    case "loglog-fit": {
      const table = loadTable(spec);
      const xcol = need(spec.x, "x column");
      const ycol = need(spec.y, "y column");
      const xs = numericColumn(table, xcol);
      const ys = numericColumn(table, ycol).map(Math.abs);
      const fit = fitOrWarn(xs, ys, true, warnings);
      const series: Series[] = [{ xs, ys, line: false }];
      if (fit) {
        const lo = Math.min(...xs);
        const hi = Math.max(...xs);
        series.push({
          xs: [lo, hi],
          ys: [Math.exp(fit.intercept + fit.slope * Math.log(lo)),
               Math.exp(fit.intercept + fit.slope * Math.log(hi))],
          markers: false,
          label: "least-squares fit",
        });
      }
      const frame: Frame = {
        title: spec.title ?? `${ycol} vs ${xcol}`,
        xlabel: spec.xlabel ?? xcol,
        ylabel: spec.ylabel ?? `|${ycol}|`,
        logX: true,
        logY: true,
        annotation: annotate(fit),
      };
      return { svg: renderSvg(series, frame), fit, warnings };
    }
    case "block-scaling": {
      const table = loadTable(spec);
      const xcol = spec.x ?? "q";
      const ycol = spec.y ?? "statistic";
      const xs = numericColumn(table, xcol);
      const ys = numericColumn(table, ycol);
      const fit = fitOrWarn(xs, ys.map((v) => Math.log(Math.abs(v) + 1e-300)),
                            false, warnings);
      const frame: Frame = {
        title: spec.title ?? "block scaling",
        xlabel: spec.xlabel ?? xcol,
        ylabel: spec.ylabel ?? ycol,
        logY: true,
        annotation: fit
          ? `log2-slope=${(fit.slope / Math.LN2).toPrecision(12)}`
          : undefined,
      };
      return { svg: renderSvg([{ xs, ys }], frame), fit, warnings };
    }
    case "residual-history": {
      let ys: number[];
      if (spec.input.endsWith(".json")) {
        const doc = JSON.parse(readFileSync(spec.input, "utf8"));
        const field = spec.jsonField ?? "residual_history";
        const arr = doc[field];
        if (!Array.isArray(arr)) {
          throw new SpecError(`json field "${field}" is not an array`);
        }
        ys = arr.map(Number);
      } else {
        const table = loadTable(spec);
        ys = numericColumn(table, need(spec.y, "y column"));
      }
      if (ys.length === 0) throw new SpecError("empty residual history");
      const xs = ys.map((_, i) => i + 1);
      const fit = fitOrWarn(xs, ys.map((v) => Math.log(v + 1e-300)), false,
                            warnings);
      const frame: Frame = {
        title: spec.title ?? "fixed-point residual history",
        xlabel: spec.xlabel ?? "iteration",
        ylabel: spec.ylabel ?? "weighted residual",
        logY: true,
        annotation: fit
          ? `contraction/iter=${Math.exp(fit.slope).toPrecision(6)}`
          : undefined,
      };
      return { svg: renderSvg([{ xs, ys }], frame), fit, warnings };
    }
    case "norm-vs-time": {
      const table = loadTable(spec);
      const xcol = spec.x ?? "t";
      const ycol = spec.y ?? "norm";
      const xs = numericColumn(table, xcol);
      const ys = numericColumn(table, ycol);
      const series: Series[] = [];
      if (spec.series) {
        if (!table.columns.includes(spec.series)) {
          throw new CsvError(`missing column "${spec.series}"`);
        }
        const groups = new Map<string, { xs: number[]; ys: number[] }>();
        table.rows.forEach((r, i) => {
          const key = String(r[spec.series as string]);
          if (!groups.has(key)) groups.set(key, { xs: [], ys: [] });
          groups.get(key)!.xs.push(xs[i]);
          groups.get(key)!.ys.push(ys[i]);
        });
        for (const [label, g] of groups) {
          series.push({ ...g, label });
        }
      } else {
        series.push({ xs, ys });
      }
      const frame: Frame = {
        title: spec.title ?? `${ycol} vs ${xcol}`,
        xlabel: spec.xlabel ?? xcol,
        ylabel: spec.ylabel ?? ycol,
      };
      return { svg: renderSvg(series, frame), fit: null, warnings };
    }
    default:
      throw new SpecError(`unknown figure kind "${(spec as FigureSpec).kind}"`);
  }
}

export function validateSpec(doc: unknown): FigureSpec {
  if (typeof doc !== "object" || doc === null) {
    throw new SpecError("figure spec must be a JSON object");
  }
  const spec = doc as Partial<FigureSpec>;
  const kinds: FigureKind[] = ["loglog-fit", "block-scaling",
    "residual-history", "norm-vs-time"];
  if (!spec.kind || !kinds.includes(spec.kind)) {
    throw new SpecError(`kind must be one of ${kinds.join(", ")}`);
  }
  if (typeof spec.input !== "string") throw new SpecError("input required");
  if (typeof spec.output !== "string") throw new SpecError("output required");
  return spec as FigureSpec;
}
