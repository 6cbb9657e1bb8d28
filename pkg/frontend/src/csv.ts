/**
 * Strict reader for the numeric CSV artifacts produced by the sampler CLI.
 *
 * The schemas are small and fixed (header row + numeric columns, '.' decimal,
 * no quoting needed), so parsing is deliberately unforgiving: any deviation
 * fails with the 1-based row number so batch rendering pipelines stop early.
 */

export class CsvError extends Error {
  readonly row: number;

  constructor(row: number, message: string) {
    super(`row ${row}: ${message}`);
    this.row = row;
    this.name = "CsvError";
  }
}

export interface NumericTable {
  header: string[];
  /** column-major: columns[i][r] is column i of data row r */
  columns: number[][];
  rows: number;
}

/** Parse CSV text into named numeric columns, validating against a schema. */
export function parseNumericCsv(text: string, expectedHeader: string[]): NumericTable {
  const lines = text.split(/\r\n|\n/).filter((line, i, all) => !(line === "" && i === all.length - 1));
  if (lines.length === 0 || (lines.length === 1 && lines[0].trim() === "")) {
    throw new CsvError(1, "empty file: expected a header row");
  }
  const header = lines[0].split(",").map((h) => h.trim());
  if (header.length !== expectedHeader.length || !expectedHeader.every((h, i) => header[i] === h)) {
    throw new CsvError(1, `header [${header.join(",")}] does not match expected [${expectedHeader.join(",")}]`);
  }
  const columns: number[][] = expectedHeader.map(() => []);
  for (let r = 1; r < lines.length; r++) {
    if (lines[r].trim() === "") {
      throw new CsvError(r + 1, "blank line inside data");
    }
    const cells = lines[r].split(",");
    if (cells.length !== expectedHeader.length) {
      throw new CsvError(r + 1, `expected ${expectedHeader.length} cells, found ${cells.length}`);
    }
    for (let c = 0; c < cells.length; c++) {
      const value = Number(cells[c]);
      if (cells[c].trim() === "" || !Number.isFinite(value)) {
        throw new CsvError(r + 1, `cell '${cells[c]}' in column '${expectedHeader[c]}' is not a finite number`);
      }
      columns[c].push(value);
    }
  }
  if (columns[0].length === 0) {
    throw new CsvError(2, "no data rows");
  }
  return { header, columns, rows: columns[0].length };
}
