/**
 * End-to-end training over a differentiable AWGN channel with the loss
 * (1 - MS-SSIM) + lambda * PAPR, per-batch SNR drawn uniformly from the
 * configured range, Adam updates.
 */

import { PATCH_DIM, patchCount, planeIndexMaps } from "./image.js";
import { Coder, TrainerConfig, paprOf } from "./model.js";
import { lumaFromPatches, msSsim } from "./msssim.js";
import { Rng } from "./rng.js";
import {
  Tensor,
  add,
  addScalar,
  backward,
  clearTape,
  mean,
  noGrad,
  scale,
  tensor,
  zeroGrads,
} from "./tensor.js";

export interface EpochLog {
  epoch: number;
  loss: number;
  msSsim: number;
  papr: number;
}

export class Adam {
  private m: Float64Array[];
  private v: Float64Array[];
  private t = 0;

  constructor(
    private params: Tensor[],
    private lr: number,
    private beta1 = 0.9,
    private beta2 = 0.999,
    private eps = 1e-8,
  ) {
    this.m = params.map((p) => new Float64Array(p.size));
    this.v = params.map((p) => new Float64Array(p.size));
  }

  step(): void {
    this.t += 1;
    const c1 = 1 - Math.pow(this.beta1, this.t);
    const c2 = 1 - Math.pow(this.beta2, this.t);
    for (let k = 0; k < this.params.length; k++) {
      const p = this.params[k];
      const g = p.grad;
      if (!g) continue;
      const m = this.m[k];
      const v = this.v[k];
      for (let i = 0; i < p.size; i++) {
        m[i] = this.beta1 * m[i] + (1 - this.beta1) * g[i];
        v[i] = this.beta2 * v[i] + (1 - this.beta2) * g[i] * g[i];
        p.data[i] -= (this.lr * (m[i] / c1)) / (Math.sqrt(v[i] / c2) + this.eps);
      }
    }
  }
}

export interface StepResult {
  loss: number;
  msSsim: number;
  papr: number;
}

/** One forward pass: encode, add channel noise, decode, score. */
export function forwardBatch(
  coder: Coder,
  batch: Float64Array,
  batchSize: number,
  snrDb: number,
  noiseRng: Rng,
): { loss: Tensor; msVal: number; paprVal: number } {
  const cfg = coder.cfg;
  const p = patchCount(cfg.cropSize);
  const rows = batchSize * p;
  const x = tensor(batch, [rows, PATCH_DIM]);
  const s = coder.encode(x);
  const paprT = paprOf(s);

  // complex-symbol SNR: unit symbol power, noise split over the two reals
  const sigma = Math.sqrt(Math.pow(10, -snrDb / 10) / 2);
  const noise = new Float64Array(s.size);
  noiseRng.fillNormal(noise, sigma);
  const y = add(s, tensor(noise, [s.size]));

  const xhat = coder.decode(y, rows);
  const maps = planeMapCache(batchSize, cfg.cropSize);
  const la = lumaFromPatches(x, maps, batchSize, cfg.cropSize);
  const lb = lumaFromPatches(xhat, maps, batchSize, cfg.cropSize);
  const ms = mean(msSsim(la, lb, cfg.cropSize));
  const loss = add(addScalar(scale(ms, -1), 1), scale(paprT, cfg.lambdaPapr));
  return { loss, msVal: ms.item(), paprVal: paprT.item() };
}

const _mapCache = new Map<string, [Int32Array, Int32Array, Int32Array]>();

function planeMapCache(batch: number, size: number) {
  const key = `${batch}x${size}`;
  let maps = _mapCache.get(key);
  if (!maps) {
    maps = planeIndexMaps(batch, size);
    _mapCache.set(key, maps);
  }
  return maps;
}

export class DivergedError extends Error {
  constructor(public log: EpochLog[]) {
    super("training diverged: loss is NaN");
  }
}

export function train(
  coder: Coder,
  dataset: Float64Array[],
  cfg: TrainerConfig,
  onEpoch?: (log: EpochLog) => void,
): EpochLog[] {
  if (dataset.length < cfg.batchSize) throw new Error("dataset smaller than one batch");
  const params = coder.parameters();
  const opt = new Adam(params, cfg.learningRate);
  const order = new Rng(cfg.seed, "order");
  const snrRng = new Rng(cfg.seed, "snr");
  const noiseRng = new Rng(cfg.seed, "channel");
  const logs: EpochLog[] = [];
  const perImage = patchCount(cfg.cropSize) * PATCH_DIM;

  for (let epoch = 0; epoch < cfg.epochs; epoch++) {
    const idx = dataset.map((_d, i) => i);
    for (let i = idx.length - 1; i > 0; i--) {
      const j = order.int(i + 1);
      [idx[i], idx[j]] = [idx[j], idx[i]];
    }
    let accLoss = 0;
    let accMs = 0;
    let accPapr = 0;
    let steps = 0;
    for (let start = 0; start + cfg.batchSize <= idx.length; start += cfg.batchSize) {
      const batch = new Float64Array(cfg.batchSize * perImage);
      for (let b = 0; b < cfg.batchSize; b++)
        batch.set(dataset[idx[start + b]], b * perImage);
      const snr = snrRng.uniform(cfg.snrRangeDb[0], cfg.snrRangeDb[1]);
      zeroGrads(params);
      clearTape();
      const { loss, msVal, paprVal } = forwardBatch(coder, batch, cfg.batchSize, snr, noiseRng);
      const lv = loss.item();
      if (!Number.isFinite(lv)) throw new DivergedError(logs);
      backward(loss);
      opt.step();
      accLoss += lv;
      accMs += msVal;
      accPapr += paprVal;
      steps += 1;
    }
    const log = {
      epoch,
      loss: accLoss / steps,
      msSsim: accMs / steps,
      papr: accPapr / steps,
    };
    logs.push(log);
    onEpoch?.(log);
  }
  return logs;
}

/** MS-SSIM of a single image coded at a fixed channel SNR (no gradients). */
export function evalAtSnr(
  coder: Coder,
  image: Float64Array,
  snrDb: number,
  noiseRng: Rng,
): number {
  return noGrad(() => {
    const { msVal } = forwardBatch(coder, image, 1, snrDb, noiseRng);
    return msVal;
  });
}

/** Mean per-image symbol PAPR over a dataset (no gradients). */
export function meanPapr(coder: Coder, images: Float64Array[]): number {
  return noGrad(() => {
    const p = patchCount(coder.cfg.cropSize);
    let acc = 0;
    for (const img of images) {
      const x = tensor(img, [p, PATCH_DIM]);
      acc += paprOf(coder.encode(x)).item();
    }
    return acc / images.length;
  });
}
