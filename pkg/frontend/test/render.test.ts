import { mkdtempSync, readFileSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { describe, expect, it } from 'vitest';

import { main } from '../src/cli.js';
import { parseCurveCsv } from '../src/csv.js';
import { groupRows } from '../src/group.js';
import { renderCsvText, renderSvg } from '../src/render.js';
import { sampleCsv } from './csv.test.js';

function countMatches(text: string, pattern: RegExp): number {
  return (text.match(pattern) ?? []).length;
}

describe('groupRows', () => {
  it('one group per policy/J for the observed kind, sorted rows', () => {
    const rows = parseCurveCsv(sampleCsv());
    const series = groupRows('observed', rows);
    expect(series.map((s) => s.label)).toEqual(['ideal', 'model (J=1)', 'model (J=2)', 'reference']);
    for (const s of series) {
      const ms = s.rows.map((r) => r.m_observed);
      expect(ms).toEqual([...ms].sort((a, b) => a - b));
    }
  });

  it('groups by K for the mrc kind', () => {
    const text = sampleCsv().replace(/,0,1,2\.0/g, ',0,2,2.0');
    const series = groupRows('mrc', parseCurveCsv(text));
    expect(series.some((s) => s.label.includes('K=2'))).toBe(true);
  });

  it('groups by fading parameters for the fading kind', () => {
    const series = groupRows('fading', parseCurveCsv(sampleCsv()));
    expect(series.every((s) => /alpha=2, mu=2$/.test(s.label))).toBe(true);
  });
});

describe('renderSvg', () => {
  it('draws one line and one band per group', () => {
    const rows = parseCurveCsv(sampleCsv());
    const svg = renderSvg('observed', rows);
    const groups = groupRows('observed', rows).length;
    expect(countMatches(svg, /class="series"/g)).toBe(groups);
    expect(countMatches(svg, /<polygon /g)).toBe(groups);
    expect(countMatches(svg, /class="legend"/g)).toBe(groups);
  });

  it('uses a log-scale OP axis with decade ticks', () => {
    const svg = renderSvg('observed', parseCurveCsv(sampleCsv()));
    expect(svg).toContain('>1e-1<');
    expect(svg).toContain('>1e-2<');
    expect(svg).toContain('Outage probability');
  });

  it('is byte-stable across repeated runs', () => {
    const text = sampleCsv();
    expect(renderCsvText('observed', text)).toBe(renderCsvText('observed', text));
  });

  it('clamps zero probabilities onto the axis floor', () => {
    const text = sampleCsv().replace('0.015,0.012', '0.0,0.0');
    const svg = renderCsvText('observed', text);
    expect(svg).not.toMatch(/NaN|Infinity/);
  });
});

describe('cli', () => {
  it('renders a file and is deterministic on disk', () => {
    const dir = mkdtempSync(join(tmpdir(), 'figs-'));
    const csvPath = join(dir, 'curve.csv');
    writeFileSync(csvPath, sampleCsv());
    const out1 = join(dir, 'a.svg');
    const out2 = join(dir, 'b.svg');
    expect(main([csvPath, 'observed', out1])).toBe(0);
    expect(main([csvPath, 'observed', out2])).toBe(0);
    expect(readFileSync(out1)).toEqual(readFileSync(out2));
    expect(readFileSync(out1, 'utf8')).toContain('<svg');
  });

  it('fails with exit 2 on empty csv', () => {
    const dir = mkdtempSync(join(tmpdir(), 'figs-'));
    const csvPath = join(dir, 'empty.csv');
    writeFileSync(csvPath, '');
    expect(main([csvPath, 'observed', join(dir, 'x.svg')])).toBe(2);
  });

  it('fails with exit 2 on unknown kind and bad usage', () => {
    expect(main(['a.csv', 'volcano', 'x.svg'])).toBe(2);
    expect(main(['onlyone'])).toBe(2);
  });

  it('fails with exit 1 on missing input file', () => {
    const dir = mkdtempSync(join(tmpdir(), 'figs-'));
    expect(main([join(dir, 'missing.csv'), 'observed', join(dir, 'x.svg')])).toBe(1);
  });
});
