/**
 * Bridge from an off-the-shelf image classifier to the toolkit: run a tfjs
 * layers model over an image folder and emit a schema-conformant scores
 * CSV. No training, no augmentation; inference order and preprocessing are
 * fixed so a given (checkpoint, folder) pair always produces the same file.
 */

import * as path from "path";
import * as tf from "@tensorflow/tfjs";

import { ScoreRow, readLabelsCsv, writeScoresCsv } from "./csv";
import { decodeToInput, listImages } from "./images";
import { loadModel } from "./model_io";

export class ClassMapMismatch extends Error {}
export class ExportError extends Error {}

export interface ExportOptions {
  modelJsonPath: string;
  imageDir: string;
  outCsv: string;
  /** classMap[modelIndex] = toolkit class index; identity when omitted. */
  classMap?: number[];
  /** Optional labels.csv; images missing from it get true_label -1. */
  labelsPath?: string;
  batchSize?: number;
  /** Exp-normalize model outputs (pass when the head emits logits). */
  applySoftmax?: boolean;
  /** Receives one message per skipped unreadable image. */
  warn?: (message: string) => void;
}

export interface ExportResult {
  rows: ScoreRow[];
  numClasses: number;
  skipped: string[];
}

function checkClassMap(classMap: number[], numClasses: number): void {
  if (classMap.length !== numClasses) {
    throw new ClassMapMismatch(
      `class map has ${classMap.length} entries but the model emits ${numClasses} classes`
    );
  }
  const seen = new Set(classMap);
  if (seen.size !== numClasses || classMap.some((c) => !Number.isInteger(c) || c < 0 || c >= numClasses)) {
    throw new ClassMapMismatch(`class map must be a permutation of 0..${numClasses - 1}`);
  }
}

function toProbabilities(raw: Float32Array, applySoftmax: boolean, sampleId: string): number[] {
  const values = Array.from(raw, Number);
  if (applySoftmax) {
    const top = Math.max(...values);
    const exps = values.map((v) => Math.exp(v - top));
    const total = exps.reduce((a, b) => a + b, 0);
    return exps.map((e) => e / total);
  }
  const total = values.reduce((a, b) => a + b, 0);
  if (Math.abs(total - 1) > 1e-3 || values.some((v) => v < 0)) {
    throw new ExportError(
      `model output for ${sampleId} is not a probability row (sum ${total}); ` +
        `pass applySoftmax if the model emits logits`
    );
  }
  // absorb float32 residue in double precision; keeps 12-digit prints summing to 1
  return values.map((v) => v / total);
}

export async function exportScores(options: ExportOptions): Promise<ExportResult> {
  const warn = options.warn ?? ((m: string) => console.warn(m));
  const batchSize = options.batchSize ?? 16;
  const model = await loadModel(options.modelJsonPath);

  const inputShape = model.inputs[0].shape;
  if (inputShape.length !== 4 || inputShape[3] !== 3) {
    throw new ExportError(`expected an image model with NHWC x3 input, got shape [${inputShape}]`);
  }
  const height = inputShape[1] as number;
  const width = inputShape[2] as number;
  const outputShape = model.outputs[0].shape;
  const numClasses = outputShape[outputShape.length - 1] as number;
  if (numClasses < 2) {
    throw new ExportError(`model emits ${numClasses} classes; need at least 2`);
  }
  const classMap = options.classMap ?? Array.from({ length: numClasses }, (_, i) => i);
  checkClassMap(classMap, numClasses);

  const labels = options.labelsPath ? readLabelsCsv(options.labelsPath) : new Map<string, number>();
  for (const [sid, label] of labels) {
    if (label !== -1 && (label < 0 || label >= numClasses)) {
      throw new ExportError(`label ${label} for ${sid} outside [0, ${numClasses})`);
    }
  }

  const decoded: { sampleId: string; pixels: Float32Array }[] = [];
  const skipped: string[] = [];
  for (const rel of listImages(options.imageDir)) {
    try {
      decoded.push({ sampleId: rel, pixels: decodeToInput(path.join(options.imageDir, rel), height, width) });
    } catch (err) {
      skipped.push(rel);
      warn(`WARNING UnreadableImage: skipping ${rel} (${(err as Error).message})`);
    }
  }
  if (decoded.length === 0) {
    throw new ExportError(`no readable .png images under ${options.imageDir}`);
  }

  const rows: ScoreRow[] = [];
  for (let start = 0; start < decoded.length; start += batchSize) {
    const batch = decoded.slice(start, start + batchSize);
    const input = tf.tensor4d(
      batch.flatMap((b) => Array.from(b.pixels)),
      [batch.length, height, width, 3]
    );
    const output = model.predict(input, { batchSize: batch.length }) as tf.Tensor;
    const flat = (await output.data()) as Float32Array;
    input.dispose();
    output.dispose();
    for (let i = 0; i < batch.length; i++) {
      const probs = toProbabilities(
        flat.slice(i * numClasses, (i + 1) * numClasses),
        options.applySoftmax ?? false,
        batch[i].sampleId
      );
      const permuted = new Array<number>(numClasses);
      for (let j = 0; j < numClasses; j++) permuted[classMap[j]] = probs[j];
      rows.push({
        sampleId: batch[i].sampleId,
        trueLabel: labels.get(batch[i].sampleId) ?? -1,
        probs: permuted,
      });
    }
  }

  writeScoresCsv(rows, numClasses, options.outCsv);
  return { rows, numClasses, skipped };
}
