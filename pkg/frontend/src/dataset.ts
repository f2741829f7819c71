/**
 * Training data: either PPM crops from a directory or deterministic
 * synthetic crops (smooth multi-octave noise with a gradient and a soft
 * blob, the same flavor of content the link simulator uses as fixtures).
 */

import { readdirSync } from "node:fs";
import { join } from "node:path";

import { Image, readPpm, toPatches } from "./image.js";
import { Rng } from "./rng.js";

export function syntheticCrop(size: number, seed: number): Image {
  const rng = new Rng(seed, "crop");
  const base = new Float64Array(size * size);
  for (const cells of [2, 4, 8]) {
    const grid: number[][] = [];
    for (let i = 0; i <= cells; i++) grid.push(Array.from({ length: cells + 1 }, () => rng.normal()));
    const amp = 1.0 / Math.sqrt(cells);
    for (let y = 0; y < size; y++)
      for (let x = 0; x < size; x++) {
        const fy = (y / size) * cells;
        const fx = (x / size) * cells;
        const iy = Math.min(Math.floor(fy), cells - 1);
        const ix = Math.min(Math.floor(fx), cells - 1);
        const ty = fy - iy;
        const tx = fx - ix;
        const v =
          grid[iy][ix] * (1 - ty) * (1 - tx) +
          grid[iy + 1][ix] * ty * (1 - tx) +
          grid[iy][ix + 1] * (1 - ty) * tx +
          grid[iy + 1][ix + 1] * ty * tx;
        base[y * size + x] += amp * v;
      }
  }
  const cy = rng.uniform(0, size);
  const cx = rng.uniform(0, size);
  const r = rng.uniform(0.15, 0.4) * size;
  const tilt = rng.uniform(-0.8, 0.8);
  for (let y = 0; y < size; y++)
    for (let x = 0; x < size; x++) {
      const d2 = (y - cy) ** 2 + (x - cx) ** 2;
      base[y * size + x] += 0.9 * Math.exp(-d2 / (2 * r * r)) + (tilt * x) / size;
    }
  let m = 0;
  let s = 0;
  for (const v of base) m += v;
  m /= base.length;
  for (const v of base) s += (v - m) ** 2;
  s = Math.sqrt(s / base.length) || 1;

  const data = new Uint8Array(size * size * 3);
  const tintR = rng.uniform(-18, 18);
  const tintB = rng.uniform(-18, 18);
  for (let i = 0; i < size * size; i++) {
    const luma = 128 + (46 * (base[i] - m)) / s;
    const vals = [luma + tintR, luma, luma + tintB];
    for (let c = 0; c < 3; c++) {
      const v = Math.round(vals[c]);
      data[i * 3 + c] = v < 0 ? 0 : v > 255 ? 255 : v;
    }
  }
  return { height: size, width: size, data };
}

export function syntheticDataset(size: number, count: number, seed: number): Float64Array[] {
  return Array.from({ length: count }, (_v, i) => toPatches(syntheticCrop(size, seed * 10007 + i)));
}

export function loadPpmDataset(dir: string, size: number): Float64Array[] {
  const out: Float64Array[] = [];
  for (const name of readdirSync(dir).sort()) {
    if (!name.endsWith(".ppm")) continue;
    const img = readPpm(join(dir, name));
    if (img.height !== size || img.width !== size)
      throw new Error(`${name}: expected ${size}x${size} crops`);
    out.push(toPatches(img));
  }
  if (out.length === 0) throw new Error(`no .ppm crops found in ${dir}`);
  return out;
}
