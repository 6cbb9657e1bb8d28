#!/usr/bin/env node
/**
 * heavytail-render: turn sampler CSV artifacts into SVG figures.
 *
 *   heavytail-render --kind qq --in out/qq.csv --out fig.svg [--title "..."]
 *
 * Exit codes: 0 written, 1 unreadable/malformed/empty input (message names
 * the offending row), 2 usage errors.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { CsvError } from "./csv.js";
import { FigureKind, render } from "./render.js";

const USAGE =
  "usage: heavytail-render --kind qq|drift|hill --in <csv> --out <svg> [--title <text>]";

export function main(argv: string[]): number {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) {
      process.stderr.write(`${USAGE}\n`);
      return 2;
    }
    args.set(key.slice(2), argv[i + 1]);
  }
  const kind = args.get("kind");
  const input = args.get("in");
  const output = args.get("out");
  if (!kind || !input || !output || !["qq", "drift", "hill"].includes(kind)) {
    process.stderr.write(`${USAGE}\n`);
    return 2;
  }
  let text: string;
  try {
    text = readFileSync(input, "utf8");
  } catch (err) {
    process.stderr.write(`error: cannot read ${input}: ${(err as Error).message}\n`);
    return 1;
  }
  try {
    const svg = render({ kind: kind as FigureKind, input: text, title: args.get("title") });
    writeFileSync(output, svg);
  } catch (err) {
    const where = err instanceof CsvError ? `${input} ` : "";
    process.stderr.write(`error: ${where}${(err as Error).message}\n`);
    return 1;
  }
  return 0;
}

const isEntry = process.argv[1] !== undefined && import.meta.url.endsWith(
  process.argv[1].split("/").pop() ?? "",
);
if (isEntry) {
  process.exit(main(process.argv.slice(2)));
}
