#!/usr/bin/env node
/**
 * Usage: fluidport-figures <curve.csv> <observed|mrc|fading> <out.svg>
 *
 * Exit codes: 0 success, 1 I/O failure, 2 bad arguments or malformed CSV.
 */

import { readFileSync, writeFileSync } from 'node:fs';

import { SchemaError } from './csv.js';
import { FIGURE_KINDS, FigureKind } from './group.js';
import { renderCsvText } from './render.js';

export function main(argv: string[]): number {
  if (argv.length !== 3) {
    process.stderr.write('usage: fluidport-figures <curve.csv> <observed|mrc|fading> <out.svg>\n');
    return 2;
  }
  const [csvPath, kind, outPath] = argv;
  if (!FIGURE_KINDS.includes(kind as FigureKind)) {
    process.stderr.write(`unknown figure kind '${kind}' (expected ${FIGURE_KINDS.join('|')})\n`);
    return 2;
  }
  let text: string;
  try {
    text = readFileSync(csvPath, 'utf8');
  } catch (err) {
    process.stderr.write(`cannot read ${csvPath}: ${(err as Error).message}\n`);
    return 1;
  }
  let svg: string;
  try {
    svg = renderCsvText(kind as FigureKind, text);
  } catch (err) {
    if (err instanceof SchemaError) {
      process.stderr.write(`schema error: ${err.message}\n`);
      return 2;
    }
    throw err;
  }
  try {
    writeFileSync(outPath, svg);
  } catch (err) {
    process.stderr.write(`cannot write ${outPath}: ${(err as Error).message}\n`);
    return 1;
  }
  return 0;
}

if (process.argv[1] && process.argv[1].endsWith('cli.js')) {
  process.exit(main(process.argv.slice(2)));
}
