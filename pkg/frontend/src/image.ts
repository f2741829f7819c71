/**
 * Binary PPM (P6, 8-bit) reading/writing and the patch layout used by the
 * coder: images are split into non-overlapping 2x2 patches, each flattened
 * to 12 values in (dy, dx, channel) order and scaled to [0, 1].
 */

import { readFileSync, writeFileSync } from "node:fs";

export interface Image {
  height: number;
  width: number;
  /** RGB interleaved, uint8 range, length h*w*3 */
  data: Uint8Array;
}

export function readPpm(path: string): Image {
  const raw = readFileSync(path);
  let pos = 0;
  const token = (): string => {
    while (pos < raw.length) {
      const c = raw[pos];
      if (c === 0x23) {
        while (pos < raw.length && raw[pos] !== 0x0a) pos++;
      } else if (c === 0x20 || c === 0x09 || c === 0x0a || c === 0x0d) {
        pos++;
      } else break;
    }
    const start = pos;
    while (pos < raw.length && ![0x20, 0x09, 0x0a, 0x0d].includes(raw[pos])) pos++;
    return raw.subarray(start, pos).toString("ascii");
  };
  if (token() !== "P6") throw new Error("not a P6 PPM");
  const w = parseInt(token(), 10);
  const h = parseInt(token(), 10);
  const maxval = parseInt(token(), 10);
  if (maxval !== 255) throw new Error("only 8-bit PPM supported");
  pos++; // single whitespace after maxval
  const body = raw.subarray(pos, pos + h * w * 3);
  if (body.length !== h * w * 3) throw new Error("truncated PPM payload");
  return { height: h, width: w, data: new Uint8Array(body) };
}

export function writePpm(path: string, img: Image): void {
  const header = Buffer.from(`P6\n${img.width} ${img.height}\n255\n`, "ascii");
  writeFileSync(path, Buffer.concat([header, Buffer.from(img.data)]));
}

export const PATCH = 2;
export const PATCH_DIM = PATCH * PATCH * 3;

export function patchCount(size: number): number {
  return (size / PATCH) * (size / PATCH);
}

/** Image -> (P, 12) patch array in [0, 1]. Requires a square, even size. */
export function toPatches(img: Image): Float64Array {
  const s = img.height;
  if (img.width !== s || s % PATCH !== 0) throw new Error("expected square even-sized crop");
  const p = patchCount(s);
  const out = new Float64Array(p * PATCH_DIM);
  let o = 0;
  for (let pi = 0; pi < s / PATCH; pi++)
    for (let pj = 0; pj < s / PATCH; pj++)
      for (let dy = 0; dy < PATCH; dy++)
        for (let dx = 0; dx < PATCH; dx++)
          for (let c = 0; c < 3; c++)
            out[o++] = img.data[((pi * PATCH + dy) * s + pj * PATCH + dx) * 3 + c] / 255;
  return out;
}

export function fromPatches(patches: Float64Array, size: number): Image {
  const data = new Uint8Array(size * size * 3);
  let o = 0;
  for (let pi = 0; pi < size / PATCH; pi++)
    for (let pj = 0; pj < size / PATCH; pj++)
      for (let dy = 0; dy < PATCH; dy++)
        for (let dx = 0; dx < PATCH; dx++)
          for (let c = 0; c < 3; c++) {
            const v = Math.round(patches[o++] * 255);
            data[((pi * PATCH + dy) * size + pj * PATCH + dx) * 3 + c] =
              v < 0 ? 0 : v > 255 ? 255 : v;
          }
  return { height: size, width: size, data };
}

/**
 * Index maps from a (B, P, 12) patch batch to one (B, S, S) plane per
 * channel, used to assemble luma tensors inside the autodiff graph.
 */
export function planeIndexMaps(batch: number, size: number): [Int32Array, Int32Array, Int32Array] {
  const maps: Int32Array[] = [0, 1, 2].map(() => new Int32Array(batch * size * size));
  const perImage = patchCount(size) * PATCH_DIM;
  for (let b = 0; b < batch; b++)
    for (let y = 0; y < size; y++)
      for (let x = 0; x < size; x++) {
        const pi = (y / PATCH) | 0;
        const pj = (x / PATCH) | 0;
        const dy = y % PATCH;
        const dx = x % PATCH;
        const patchIdx = pi * (size / PATCH) + pj;
        const base = b * perImage + patchIdx * PATCH_DIM + (dy * PATCH + dx) * 3;
        const out = b * size * size + y * size + x;
        for (let c = 0; c < 3; c++) maps[c][out] = base + c;
      }
  return maps as [Int32Array, Int32Array, Int32Array];
}
