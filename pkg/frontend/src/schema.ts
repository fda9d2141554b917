/** Column schema of the experiment CSV files and row-level parsing. */

export const REQUIRED_COLUMNS = [
  "sweep_name",
  "sweep_value",
  "scheme",
  "scenario",
  "metric",
  "stderr",
  "realizations",
  "seed",
  "floor",
] as const;

export interface ResultRow {
  sweepName: string;
  sweepValue: number;
  scheme: string;
  scenario: string;
  metric: number;
  stderr: number;
  realizations: number;
  seed: number;
  floor: number | null;
}

export class SchemaError extends Error {
  readonly missing: string[];
  readonly extra: string[];

  constructor(message: string, missing: string[], extra: string[]) {
    super(message);
    this.name = "SchemaError";
    this.missing = missing;
    this.extra = extra;
  }
}

/** Throws a SchemaError listing the column diff when headers don't match. */
export function checkColumns(headers: string[] | undefined): void {
  const got = headers ?? [];
  const want = REQUIRED_COLUMNS as readonly string[];
  const missing = want.filter((c) => !got.includes(c));
  const extra = got.filter((c) => !want.includes(c));
  if (missing.length > 0 || extra.length > 0) {
    const parts: string[] = [];
    if (missing.length > 0) parts.push(`missing: ${missing.join(", ")}`);
    if (extra.length > 0) parts.push(`unexpected: ${extra.join(", ")}`);
    throw new SchemaError(`CSV columns do not match the results schema (${parts.join("; ")})`, missing, extra);
  }
}

function num(field: string, raw: string | undefined): number {
  const value = Number(raw);
  if (raw === undefined || raw === "" || !Number.isFinite(value)) {
    throw new SchemaError(`non-numeric value ${JSON.stringify(raw)} in column ${field}`, [], []);
  }
  return value;
}

export function parseRow(record: Record<string, string>): ResultRow {
  return {
    sweepName: record.sweep_name,
    sweepValue: num("sweep_value", record.sweep_value),
    scheme: record.scheme,
    scenario: record.scenario,
    metric: num("metric", record.metric),
    stderr: num("stderr", record.stderr),
    realizations: num("realizations", record.realizations),
    seed: num("seed", record.seed),
    floor: record.floor === "" || record.floor === undefined ? null : num("floor", record.floor),
  };
}
