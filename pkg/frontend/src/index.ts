export { CURVE_COLUMNS, CurveRow, SchemaError, parseCurveCsv } from './csv.js';
export { FIGURE_KINDS, FigureKind, Series, groupRows } from './group.js';
export { linearScale, logScale } from './scale.js';
export { renderCsvText, renderSvg } from './render.js';
