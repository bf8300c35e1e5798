/**
 * Image listing and decoding. Only PNG is supported; the per-file failure
 * mode is "warn and skip", never abort, so one corrupt file cannot sink a
 * whole export run.
 */

import * as fs from "fs";
import * as path from "path";
import { PNG } from "pngjs";

/** Relative paths of every .png under dir, sorted so output order is stable. */
export function listImages(imageDir: string): string[] {
  const found: string[] = [];
  const walk = (sub: string) => {
    for (const entry of fs.readdirSync(path.join(imageDir, sub), { withFileTypes: true })) {
      const rel = sub ? `${sub}/${entry.name}` : entry.name;
      if (entry.isDirectory()) {
        walk(rel);
      } else if (entry.name.toLowerCase().endsWith(".png")) {
        found.push(rel);
      }
    }
  };
  walk("");
  found.sort();
  return found;
}

/**
 * Decode a PNG and resize (nearest neighbor) to height x width RGB floats
 * in [0, 1], flattened in HWC order. Throws on undecodable content.
 */
export function decodeToInput(filePath: string, height: number, width: number): Float32Array {
  const png = PNG.sync.read(fs.readFileSync(filePath));
  const out = new Float32Array(height * width * 3);
  for (let y = 0; y < height; y++) {
    const srcY = Math.min(png.height - 1, Math.floor((y * png.height) / height));
    for (let x = 0; x < width; x++) {
      const srcX = Math.min(png.width - 1, Math.floor((x * png.width) / width));
      const src = (srcY * png.width + srcX) * 4;
      const dst = (y * width + x) * 3;
      out[dst] = png.data[src] / 255;
      out[dst + 1] = png.data[src + 1] / 255;
      out[dst + 2] = png.data[src + 2] / 255;
    }
  }
  return out;
}
