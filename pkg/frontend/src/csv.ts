/** Parsing and validation of the simulator's curve CSV schema. */

export const CURVE_COLUMNS = [
  'm_observed',
  'policy',
  'j_budget',
  'k_combine',
  'alpha',
  'mu',
  'gamma_th_db',
  'op',
  'ci_low',
  'ci_high',
  'trials',
  'seed',
] as const;

export interface CurveRow {
  m_observed: number;
  policy: string;
  j_budget: number;
  k_combine: number;
  alpha: number;
  mu: number;
  gamma_th_db: number;
  op: number;
  ci_low: number;
  ci_high: number;
  trials: number;
  seed: number;
}

export class SchemaError extends Error {}

function parseNumber(raw: string, column: string, line: number): number {
  if (raw === 'inf' || raw === 'Infinity') return Infinity;
  if (raw === '-inf' || raw === '-Infinity') return -Infinity;
  const value = Number(raw);
  if (raw.trim() === '' || Number.isNaN(value)) {
    throw new SchemaError(`line ${line}: column ${column} is not numeric: '${raw}'`);
  }
  return value;
}

/** Parse curve CSV text; throws SchemaError on missing columns or rows. */
export function parseCurveCsv(text: string): CurveRow[] {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new SchemaError('empty CSV: no header line');
  }
  const header = lines[0].split(',');
  for (const column of CURVE_COLUMNS) {
    if (!header.includes(column)) {
      throw new SchemaError(`missing column '${column}' in header [${header.join(', ')}]`);
    }
  }
  if (lines.length === 1) {
    throw new SchemaError('empty CSV: header but no data rows');
  }
  const index = new Map(header.map((name, i) => [name, i]));
  const rows: CurveRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(',');
    if (cells.length !== header.length) {
      throw new SchemaError(`line ${i + 1}: expected ${header.length} cells, got ${cells.length}`);
    }
    const cell = (name: string) => cells[index.get(name)!];
    rows.push({
      m_observed: parseNumber(cell('m_observed'), 'm_observed', i + 1),
      policy: cell('policy'),
      j_budget: parseNumber(cell('j_budget'), 'j_budget', i + 1),
      k_combine: parseNumber(cell('k_combine'), 'k_combine', i + 1),
      alpha: parseNumber(cell('alpha'), 'alpha', i + 1),
      mu: parseNumber(cell('mu'), 'mu', i + 1),
      gamma_th_db: parseNumber(cell('gamma_th_db'), 'gamma_th_db', i + 1),
      op: parseNumber(cell('op'), 'op', i + 1),
      ci_low: parseNumber(cell('ci_low'), 'ci_low', i + 1),
      ci_high: parseNumber(cell('ci_high'), 'ci_high', i + 1),
      trials: parseNumber(cell('trials'), 'trials', i + 1),
      seed: parseNumber(cell('seed'), 'seed', i + 1),
    });
  }
  return rows;
}
