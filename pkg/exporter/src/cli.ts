#!/usr/bin/env node
/**
 * scores-export: run a tfjs image classifier over a folder of PNGs and
 * write a scores CSV the conformal toolkit ingests directly.
 *
 *   scores-export --model model/model.json --images data/ --out scores.csv \
 *                 [--labels labels.csv] [--class-map map.json] \
 *                 [--batch-size 16] [--apply-softmax]
 */

import "./quiet_tfjs";

import * as fs from "fs";

import { ClassMapMismatch, ExportError, exportScores } from "./export";

interface Args {
  model: string;
  images: string;
  out: string;
  labels?: string;
  classMap?: string;
  batchSize: number;
  applySoftmax: boolean;
}

function parseArgs(argv: string[]): Args {
  const args: Partial<Args> = { batchSize: 16, applySoftmax: false };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) throw new Error(`${flag} needs a value`);
      return argv[i];
    };
    switch (flag) {
      case "--model":
        args.model = next();
        break;
      case "--images":
        args.images = next();
        break;
      case "--out":
        args.out = next();
        break;
      case "--labels":
        args.labels = next();
        break;
      case "--class-map":
        args.classMap = next();
        break;
      case "--batch-size":
        args.batchSize = Number(next());
        break;
      case "--apply-softmax":
        args.applySoftmax = true;
        break;
      case "--help":
      case "-h":
        console.log(
          "usage: scores-export --model model.json --images dir --out scores.csv\n" +
            "       [--labels labels.csv] [--class-map map.json]\n" +
            "       [--batch-size 16] [--apply-softmax]"
        );
        process.exit(0);
        break;
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  for (const required of ["model", "images", "out"] as const) {
    if (!args[required]) throw new Error(`--${required} is required`);
  }
  return args as Args;
}

async function main(): Promise<number> {
  let args: Args;
  try {
    args = parseArgs(process.argv.slice(2));
  } catch (err) {
    console.error(`ERROR Usage: ${(err as Error).message}`);
    return 2;
  }
  try {
    const classMap = args.classMap
      ? (JSON.parse(fs.readFileSync(args.classMap, "utf-8")) as number[])
      : undefined;
    const result = await exportScores({
      modelJsonPath: args.model,
      imageDir: args.images,
      outCsv: args.out,
      classMap,
      labelsPath: args.labels,
      batchSize: args.batchSize,
      applySoftmax: args.applySoftmax,
    });
    console.log(
      `wrote ${result.rows.length} rows x ${result.numClasses} classes to ${args.out}` +
        (result.skipped.length ? ` (skipped ${result.skipped.length} unreadable)` : "")
    );
    return 0;
  } catch (err) {
    if (err instanceof ClassMapMismatch) {
      console.error(`ERROR ClassMapMismatch: ${err.message}`);
      return 22;
    }
    if (err instanceof ExportError) {
      console.error(`ERROR ExportError: ${err.message}`);
      return 1;
    }
    console.error(`ERROR IOFailure: ${(err as Error).message}`);
    return 4;
  }
}

main().then((code) => {
  process.exitCode = code;
});
