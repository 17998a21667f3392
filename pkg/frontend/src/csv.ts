/** Strict CSV loading against the fixed column contracts of the simulator. */

import Papa from "papaparse";

export interface Table {
  columns: string[];
  rows: Record<string, string>[];
}

/** Parse CSV text; one header row, comma-separated, no loose rows. */
export function parseCsv(text: string): Table {
  const result = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  const fatal = result.errors.filter((e) => e.type !== "FieldMismatch");
  if (fatal.length > 0) {
    const first = fatal[0]!;
    throw new Error(`CSV parse error: ${first.message} (row ${first.row})`);
  }
  return { columns: result.meta.fields ?? [], rows: result.data };
}

/** Require the exact documented header, naming the expectation on failure. */
export function requireColumns(
  table: Table,
  expected: readonly string[],
  context: string,
): void {
  const got = table.columns;
  const same =
    got.length === expected.length && expected.every((c, i) => got[i] === c);
  if (!same) {
    throw new Error(
      `${context}: expected columns ${expected.join(",")}, got ${got.join(",")}`,
    );
  }
}

/** A column as numbers, rejecting anything that does not parse. */
export function numericColumn(table: Table, name: string): number[] {
  return table.rows.map((row, i) => {
    const raw = row[name];
    const value = raw === undefined || raw === "" ? NaN : Number(raw);
    if (!Number.isFinite(value)) {
      throw new Error(`column ${name}, row ${i + 1}: not a number: ${raw}`);
    }
    return value;
  });
}

/** Distinct values of a string column, in first-appearance order. */
export function distinct(table: Table, name: string): string[] {
  const seen: string[] = [];
  for (const row of table.rows) {
    const value = row[name] ?? "";
    if (!seen.includes(value)) seen.push(value);
  }
  return seen;
}
