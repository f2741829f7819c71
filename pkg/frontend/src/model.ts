/**
 * The learned analog coder: a patch-embedding encoder (2x2 patches, then
 * pointwise dense stages) mapping images straight to power-normalized
 * channel symbols, and a mirror-image decoder mapping noisy symbols back to
 * pixels. One complex symbol is two consecutive reals, so symbolsPerImage
 * below counts complex symbols like the link simulator does.
 */

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { PATCH_DIM, patchCount } from "./image.js";
import { Rng } from "./rng.js";
import {
  Tensor,
  addBias,
  div,
  gelu,
  matmul,
  maxAll,
  mean,
  mulScalarT,
  param,
  reshape,
  sigmoid,
  sqrtT,
  square,
} from "./tensor.js";

export interface TrainerConfig {
  cropSize: number;          // paper trains on 256 crops; toy default 32
  stages: number;            // hidden pointwise stages in encoder/decoder
  hiddenDim: number;
  symbolsPerPatch: number;   // real symbol values emitted per 2x2 patch
  snrRangeDb: [number, number];
  lambdaPapr: number;
  learningRate: number;
  batchSize: number;
  epochs: number;
  seed: number;
}

export const DEFAULT_CONFIG: TrainerConfig = {
  cropSize: 32,
  stages: 2,
  hiddenDim: 48,
  symbolsPerPatch: 3, // 12 source values -> 3 reals: the 1/8 complex ratio
  snrRangeDb: [1, 14],
  lambdaPapr: 5e-4,
  learningRate: 1e-4,
  batchSize: 16,
  epochs: 30,
  seed: 7,
};

export function symbolsPerImage(cfg: TrainerConfig): number {
  return (patchCount(cfg.cropSize) * cfg.symbolsPerPatch) / 2; // complex count
}

interface Linear {
  w: Tensor;
  b: Tensor;
}

export class Coder {
  cfg: TrainerConfig;
  enc: Linear[];
  dec: Linear[];

  constructor(cfg: TrainerConfig, rng: Rng) {
    this.cfg = cfg;
    const dims = [PATCH_DIM, ...Array(cfg.stages).fill(cfg.hiddenDim), cfg.symbolsPerPatch];
    this.enc = [];
    this.dec = [];
    for (let i = 0; i + 1 < dims.length; i++) this.enc.push(initLinear(dims[i], dims[i + 1], rng));
    const rdims = dims.slice().reverse();
    for (let i = 0; i + 1 < rdims.length; i++) this.dec.push(initLinear(rdims[i], rdims[i + 1], rng));
  }

  parameters(): Tensor[] {
    const out: Tensor[] = [];
    for (const l of [...this.enc, ...this.dec]) out.push(l.w, l.b);
    return out;
  }

  /**
   * (B*P, 12) patches -> flat symbol block, normalized so pairs of reals
   * form unit-mean-power complex symbols (each real carries power 1/2).
   */
  encode(patches: Tensor): Tensor {
    let h = patches;
    for (let i = 0; i < this.enc.length; i++) {
      h = addBias(matmul(h, this.enc[i].w), this.enc[i].b);
      if (i + 1 < this.enc.length) h = gelu(h);
    }
    const flat = reshape(h, [h.size]);
    const rms = sqrtT(mean(square(flat)));
    const inv = div(scalarHalfSqrt(), rms);
    return mulScalarT(flat, inv);
  }

  /** Flat received symbols -> (B*P, 12) patch reconstruction in [0, 1]. */
  decode(symbols: Tensor, rows: number): Tensor {
    let h = reshape(symbols, [rows, this.cfg.symbolsPerPatch]);
    for (let i = 0; i < this.dec.length; i++) {
      h = addBias(matmul(h, this.dec[i].w), this.dec[i].b);
      if (i + 1 < this.dec.length) h = gelu(h);
    }
    return sigmoid(h);
  }
}

function scalarHalfSqrt(): Tensor {
  return new Tensor(Float64Array.of(Math.SQRT1_2), [], false);
}

function initLinear(nin: number, nout: number, rng: Rng): Linear {
  const w = new Float64Array(nin * nout);
  const s = Math.sqrt(2 / (nin + nout));
  for (let i = 0; i < w.length; i++) w[i] = rng.normal() * s;
  return { w: param(w, [nin, nout]), b: param(new Float64Array(nout), [nout]) };
}

/** Peak-to-average power ratio of a flat symbol block, differentiable. */
export function paprOf(symbols: Tensor): Tensor {
  const p = square(symbols);
  return div(maxAll(p), mean(p));
}

export function saveModel(dir: string, coder: Coder, log: unknown): void {
  mkdirSync(dir, { recursive: true });
  const params = coder.parameters();
  const total = params.reduce((a, p) => a + p.size, 0);
  const blob = new Float64Array(total);
  let off = 0;
  for (const p of params) {
    blob.set(p.data, off);
    off += p.size;
  }
  writeFileSync(join(dir, "weights.bin"), Buffer.from(blob.buffer, 0, total * 8));
  writeFileSync(
    join(dir, "config.json"),
    JSON.stringify({ config: coder.cfg, format: "jscc-coder-v1" }, null, 1) + "\n",
  );
  writeFileSync(join(dir, "log.json"), JSON.stringify(log, null, 1) + "\n");
}

export function loadModel(dir: string): Coder {
  const meta = JSON.parse(readFileSync(join(dir, "config.json"), "utf8"));
  if (meta.format !== "jscc-coder-v1") throw new Error("unknown model format");
  const cfg: TrainerConfig = meta.config;
  const coder = new Coder(cfg, new Rng(0, "init"));
  const raw = readFileSync(join(dir, "weights.bin"));
  const blob = new Float64Array(raw.buffer, raw.byteOffset, raw.byteLength / 8);
  let off = 0;
  for (const p of coder.parameters()) {
    p.data.set(blob.subarray(off, off + p.size));
    off += p.size;
  }
  if (off !== blob.length) throw new Error("weight blob size mismatch");
  return coder;
}
