/**
 * Differentiable multi-scale structural similarity on luma planes.
 *
 * Standard constants (11x11 Gaussian window, sigma 1.5, K1=0.01, K2=0.03,
 * scale weights 0.0448/0.2856/0.3001/0.2363/0.1333), dyadic 2x2-mean
 * downsampling; small crops reduce the scale count with renormalized
 * weights, matching the scoring used by the link simulator.
 */

import {
  Tensor,
  add,
  addScalar,
  avgPool2,
  clampMin,
  conv2dValid,
  div,
  expT,
  gather,
  logT,
  mean,
  mul,
  scale,
  sub,
} from "./tensor.js";

const WIN = 11;
const SIGMA = 1.5;
const K1 = 0.01;
const K2 = 0.03;
const L = 1.0; // luma is kept in [0, 1]
export const SCALE_WEIGHTS = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

function gaussianKernel(): Float64Array {
  const g = new Float64Array(WIN);
  let s = 0;
  for (let i = 0; i < WIN; i++) {
    const d = i - (WIN - 1) / 2;
    g[i] = Math.exp(-(d * d) / (2 * SIGMA * SIGMA));
    s += g[i];
  }
  const k = new Float64Array(WIN * WIN);
  for (let i = 0; i < WIN; i++)
    for (let j = 0; j < WIN; j++) k[i * WIN + j] = (g[i] / s) * (g[j] / s);
  return k;
}

const KERNEL = gaussianKernel();

export function scalesFor(size: number): number {
  let scales = 1;
  let m = size;
  while (scales < 5 && (m >> 1) >= WIN) {
    scales += 1;
    m >>= 1;
  }
  return scales;
}

function blur(x: Tensor): Tensor {
  return conv2dValid(x, KERNEL, WIN);
}

/** Mean luminance and contrast-structure terms of one scale. */
function ssimTerms(a: Tensor, b: Tensor): { lum: Tensor; cs: Tensor } {
  const c1 = (K1 * L) ** 2;
  const c2 = (K2 * L) ** 2;
  const muA = blur(a);
  const muB = blur(b);
  const muA2 = mul(muA, muA);
  const muB2 = mul(muB, muB);
  const muAB = mul(muA, muB);
  const varA = sub(blur(mul(a, a)), muA2);
  const varB = sub(blur(mul(b, b)), muB2);
  const cov = sub(blur(mul(a, b)), muAB);
  const lum = div(addScalar(scale(muAB, 2), c1), addScalar(add(muA2, muB2), c1));
  const cs = div(addScalar(scale(cov, 2), c2), addScalar(add(varA, varB), c2));
  return { lum: mean(lum), cs: mean(cs) };
}

/**
 * MS-SSIM over a batch of luma planes (B, S, S), averaged per batch.
 * Built multiplicatively with weighted powers; power via exp/log is avoided
 * by using fixed-weight products of per-scale means raised elementwise.
 */
export function msSsim(a: Tensor, b: Tensor, size: number): Tensor {
  const scales = scalesFor(size);
  const wsum = SCALE_WEIGHTS.slice(0, scales).reduce((x, y) => x + y, 0);
  let xa = a;
  let xb = b;
  let score: Tensor | null = null;
  for (let s = 0; s < scales; s++) {
    const w = SCALE_WEIGHTS[s] / wsum;
    const { lum, cs } = ssimTerms(xa, xb);
    const term = s === scales - 1 ? mul(lum, cs) : cs;
    const powed = powScalar(term, w);
    score = score === null ? powed : mul(score, powed);
    if (s < scales - 1) {
      xa = avgPool2(xa);
      xb = avgPool2(xb);
    }
  }
  return score!;
}

/** t^w via exp(w log t); negative terms (early training) clamp to ~0 first. */
function powScalar(t: Tensor, w: number): Tensor {
  return expT(scale(logT(clampMin(t, 1e-6)), w));
}

/** Luma (BT.601) from three channel gathers out of the patch tensor. */
export function lumaFromPatches(
  patches: Tensor,
  maps: [Int32Array, Int32Array, Int32Array],
  batch: number,
  size: number,
): Tensor {
  const shape = [batch, size, size];
  const r = gather(patches, maps[0], shape);
  const g = gather(patches, maps[1], shape);
  const b = gather(patches, maps[2], shape);
  return add(add(scale(r, 0.299), scale(g, 0.587)), scale(b, 0.114));
}
