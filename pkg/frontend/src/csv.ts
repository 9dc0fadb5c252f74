/** Reader for the experiment CSV artifacts.
 *
 * The format is plain comma-separated text: an optional leading comment
 * line (`# generated_at=...`), a header row, then data rows; fields never
 * contain commas or quotes.  Numeric-looking fields are parsed to numbers,
 * everything else stays a string.
 */

export interface Table {
  columns: string[];
  rows: Record<string, number | string>[];
}

export class CsvError extends Error {}

export function parseCsv(text: string): Table {
  const lines = text
    .split(/\r?\n/)
    .filter((ln) => ln.length > 0 && !ln.startsWith("#"));
  if (lines.length === 0) {
    throw new CsvError("empty CSV: no header row");
  }
  const columns = lines[0].split(",");
  if (lines.length === 1) {
    throw new CsvError("empty CSV: header but no data rows");
  }
  const rows = lines.slice(1).map((ln, i) => {
    const parts = ln.split(",");
    if (parts.length !== columns.length) {
      throw new CsvError(
        `row ${i + 1} has ${parts.length} fields, header has ${columns.length}`,
      );
    }
    const row: Record<string, number | string> = {};
    columns.forEach((c, j) => {
      const raw = parts[j];
      const num = Number(raw);
      row[c] = raw !== "" && !Number.isNaN(num) ? num : raw;
    });
    return row;
  });
  return { columns, rows };
}

/** Extract one numeric column, failing loudly if it is missing. */
export function numericColumn(table: Table, name: string): number[] {
  if (!table.columns.includes(name)) {
    throw new CsvError(
      `missing column "${name}" (have: ${table.columns.join(", ")})`,
    );
  }
  return table.rows.map((r) => {
    const v = r[name];
    if (typeof v !== "number") {
      throw new CsvError(`column "${name}" has non-numeric value "${v}"`);
    }
    return v;
  });
}
