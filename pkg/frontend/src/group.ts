/** Row grouping: one plotted line per (figure kind)-specific key. */

import { CurveRow, SchemaError } from './csv.js';

export type FigureKind = 'observed' | 'mrc' | 'fading';

export const FIGURE_KINDS: FigureKind[] = ['observed', 'mrc', 'fading'];

export interface Series {
  label: string;
  rows: CurveRow[]; // sorted by m_observed
}

function labelFor(kind: FigureKind, row: CurveRow): string {
  switch (kind) {
    case 'observed':
      return row.policy === 'model' ? `model (J=${row.j_budget})` : row.policy;
    case 'mrc': {
      const name = row.policy === 'model' ? `model (J=${row.j_budget})` : row.policy;
      return `${name}, K=${row.k_combine}`;
    }
    case 'fading':
      return `${row.policy}, alpha=${row.alpha}, mu=${row.mu}`;
  }
}

/** Group rows into legend series; rows sorted by observed-port count. */
export function groupRows(kind: FigureKind, rows: CurveRow[]): Series[] {
  if (rows.length === 0) {
    throw new SchemaError('no rows to group');
  }
  const groups = new Map<string, CurveRow[]>();
  for (const row of rows) {
    const label = labelFor(kind, row);
    const bucket = groups.get(label);
    if (bucket) bucket.push(row);
    else groups.set(label, [row]);
  }
  const series = [...groups.entries()].map(([label, bucket]) => ({
    label,
    rows: [...bucket].sort((a, b) => a.m_observed - b.m_observed),
  }));
  series.sort((a, b) => (a.label < b.label ? -1 : a.label > b.label ? 1 : 0));
  return series;
}
