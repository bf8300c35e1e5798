/**
 * Scores-CSV writing and labels-CSV reading, matching the toolkit contract:
 * header `sample_id,true_label,p_0,...,p_{K-1}`, UTF-8, LF line endings,
 * probabilities printed with 12 significant digits, true_label -1 = unknown.
 */

import * as fs from "fs";

export interface ScoreRow {
  sampleId: string;
  trueLabel: number;
  probs: number[];
}

/** 12 significant digits, trailing zeros trimmed (same shape as C's %.12g). */
export function formatProb(x: number): string {
  return String(parseFloat(x.toPrecision(12)));
}

function csvQuote(cell: string): string {
  if (/[",\n\r]/.test(cell)) {
    return '"' + cell.replace(/"/g, '""') + '"';
  }
  return cell;
}

export function writeScoresCsv(rows: ScoreRow[], numClasses: number, outPath: string): void {
  const header = ["sample_id", "true_label"];
  for (let j = 0; j < numClasses; j++) header.push(`p_${j}`);
  const lines = [header.join(",")];
  for (const row of rows) {
    if (row.probs.length !== numClasses) {
      throw new Error(`row ${row.sampleId} has ${row.probs.length} probabilities, expected ${numClasses}`);
    }
    const cells = [csvQuote(row.sampleId), String(row.trueLabel)];
    for (const p of row.probs) cells.push(formatProb(p));
    lines.push(cells.join(","));
  }
  fs.writeFileSync(outPath, lines.join("\n") + "\n", { encoding: "utf-8" });
}

/** Parse the optional `sample_id,true_label` companion file. */
export function readLabelsCsv(path: string): Map<string, number> {
  const text = fs.readFileSync(path, "utf-8");
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0 || lines[0] !== "sample_id,true_label") {
    throw new Error(`${path}: header must be 'sample_id,true_label'`);
  }
  const out = new Map<string, number>();
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== 2) {
      throw new Error(`${path}:${i + 1}: expected 2 cells, got ${cells.length}`);
    }
    const label = Number(cells[1]);
    if (!Number.isInteger(label)) {
      throw new Error(`${path}:${i + 1}: true_label ${cells[1]} is not an integer`);
    }
    if (out.has(cells[0])) {
      throw new Error(`${path}:${i + 1}: duplicate sample_id ${cells[0]}`);
    }
    out.set(cells[0], label);
  }
  return out;
}
