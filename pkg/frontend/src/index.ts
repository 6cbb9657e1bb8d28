export { CsvError, parseNumericCsv } from "./csv.js";
export { render, logLogSlope } from "./render.js";
export type { FigureKind, FigureSpec } from "./render.js";
