/** SVG rendering of outage-probability curves with confidence bands. */

import { CurveRow, parseCurveCsv } from './csv.js';
import { FigureKind, Series, groupRows } from './group.js';
import { fmt, linearScale, logScale } from './scale.js';

const WIDTH = 760;
const HEIGHT = 520;
const MARGIN = { top: 48, right: 36, bottom: 56, left: 78 };

const PALETTE = [
  '#1f77b4',
  '#d62728',
  '#2ca02c',
  '#9467bd',
  '#ff7f0e',
  '#17becf',
  '#8c564b',
  '#e377c2',
  '#7f7f7f',
  '#bcbd22',
];

const TITLES: Record<FigureKind, string> = {
  observed: 'Outage probability vs observed ports by selection policy',
  mrc: 'Outage probability vs observed ports by combined ports K',
  fading: 'Outage probability vs observed ports across fading parameters',
};

/** Zero probabilities cannot sit on a log axis; clamp to the floor. */
function floorOf(rows: CurveRow[]): number {
  const positive = rows
    .flatMap((r) => [r.op, r.ci_low])
    .filter((v) => v > 0);
  if (positive.length === 0) return 1e-6;
  return Math.min(...positive) / 2;
}

function esc(text: string): string {
  return text.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;');
}

export function renderSvg(kind: FigureKind, rows: CurveRow[]): string {
  const series = groupRows(kind, rows);
  const floor = floorOf(rows);
  const ms = rows.map((r) => r.m_observed);
  const highs = rows.map((r) => Math.max(r.ci_high, floor));
  const x = linearScale([Math.min(...ms), Math.max(...ms)], [MARGIN.left, WIDTH - MARGIN.right]);
  const y = logScale(
    [floor, Math.max(...highs)],
    [HEIGHT - MARGIN.bottom, MARGIN.top],
  );
  const clampY = (v: number) => y(Math.max(v, floor));

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(
    `<text x="${WIDTH / 2}" y="24" text-anchor="middle" font-size="15">${esc(TITLES[kind])}</text>`,
  );

  // axes and grid
  const axisBottom = HEIGHT - MARGIN.bottom;
  for (const tick of y.ticks()) {
    const py = fmt(y(tick));
    parts.push(
      `<line x1="${MARGIN.left}" y1="${py}" x2="${WIDTH - MARGIN.right}" y2="${py}" stroke="#dddddd" stroke-width="1"/>`,
    );
    parts.push(
      `<text x="${MARGIN.left - 8}" y="${py}" text-anchor="end" dominant-baseline="middle" font-size="11">1e${Math.round(Math.log10(tick))}</text>`,
    );
  }
  for (const tick of x.ticks()) {
    const px = fmt(x(tick));
    parts.push(
      `<line x1="${px}" y1="${axisBottom}" x2="${px}" y2="${axisBottom + 5}" stroke="#333333" stroke-width="1"/>`,
    );
    parts.push(
      `<text x="${px}" y="${axisBottom + 18}" text-anchor="middle" font-size="11">${tick}</text>`,
    );
  }
  parts.push(
    `<line x1="${MARGIN.left}" y1="${axisBottom}" x2="${WIDTH - MARGIN.right}" y2="${axisBottom}" stroke="#333333" stroke-width="1"/>`,
  );
  parts.push(
    `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" y2="${axisBottom}" stroke="#333333" stroke-width="1"/>`,
  );
  parts.push(
    `<text x="${(MARGIN.left + WIDTH - MARGIN.right) / 2}" y="${HEIGHT - 16}" text-anchor="middle" font-size="13">Observed ports</text>`,
  );
  parts.push(
    `<text x="20" y="${(MARGIN.top + axisBottom) / 2}" text-anchor="middle" font-size="13" transform="rotate(-90 20 ${(MARGIN.top + axisBottom) / 2})">Outage probability</text>`,
  );

  series.forEach((s: Series, i: number) => {
    const color = PALETTE[i % PALETTE.length];
    // confidence band: upper bound forward, lower bound back
    const upper = s.rows.map((r) => `${fmt(x(r.m_observed))},${fmt(clampY(r.ci_high))}`);
    const lower = [...s.rows]
      .reverse()
      .map((r) => `${fmt(x(r.m_observed))},${fmt(clampY(r.ci_low))}`);
    parts.push(
      `<polygon points="${[...upper, ...lower].join(' ')}" fill="${color}" opacity="0.15"/>`,
    );
    const path = s.rows
      .map((r, j) => `${j === 0 ? 'M' : 'L'}${fmt(x(r.m_observed))} ${fmt(clampY(r.op))}`)
      .join(' ');
    parts.push(
      `<path d="${path}" fill="none" stroke="${color}" stroke-width="1.8" class="series"/>`,
    );
    for (const r of s.rows) {
      parts.push(
        `<circle cx="${fmt(x(r.m_observed))}" cy="${fmt(clampY(r.op))}" r="3" fill="${color}"/>`,
      );
    }
  });

  // legend
  const legendX = WIDTH - MARGIN.right - 210;
  series.forEach((s, i) => {
    const ly = MARGIN.top + 8 + i * 18;
    const color = PALETTE[i % PALETTE.length];
    parts.push(
      `<line x1="${legendX}" y1="${ly}" x2="${legendX + 22}" y2="${ly}" stroke="${color}" stroke-width="2"/>`,
    );
    parts.push(
      `<text x="${legendX + 28}" y="${ly + 4}" font-size="11" class="legend">${esc(s.label)}</text>`,
    );
  });

  parts.push('</svg>');
  return parts.join('\n') + '\n';
}

export function renderCsvText(kind: FigureKind, text: string): string {
  return renderSvg(kind, parseCurveCsv(text));
}
