import { describe, expect, it } from "vitest";

import { syntheticDataset } from "../src/dataset.js";
import { PATCH_DIM, patchCount } from "../src/image.js";
import { Coder, DEFAULT_CONFIG, TrainerConfig } from "../src/model.js";
import { Rng } from "../src/rng.js";
import { noGrad, tensor } from "../src/tensor.js";
import { DivergedError, evalAtSnr, meanPapr, train } from "../src/train.js";

// reduced-but-real configuration so the A/B stays test-sized
const QUICK: TrainerConfig = {
  ...DEFAULT_CONFIG,
  hiddenDim: 32,
  stages: 1,
  epochs: 8,
  seed: 7,
};

function runTraining(lambdaPapr: number) {
  const cfg = { ...QUICK, lambdaPapr };
  const data = syntheticDataset(cfg.cropSize, 100, cfg.seed);
  const coder = new Coder(cfg, new Rng(cfg.seed, "init"));
  const logs = train(coder, data, cfg);
  return { coder, logs, data };
}

describe("trainer", () => {
  it("papr regularizer lowers symbol papr at matched quality (A/B, same seed)", () => {
    const a = runTraining(DEFAULT_CONFIG.lambdaPapr); // 5e-4
    const b = runTraining(0.0);

    // smoke: loss decreases from its starting level in both runs
    expect(a.logs.at(-1)!.loss).toBeLessThan(a.logs[0].loss);
    expect(b.logs.at(-1)!.loss).toBeLessThan(b.logs[0].loss);

    const evalSet = syntheticDataset(QUICK.cropSize, 12, 9001);
    const paprReg = meanPapr(a.coder, evalSet);
    const paprFree = meanPapr(b.coder, evalSet);
    expect(paprReg).toBeLessThan(paprFree);

    // trained beats untrained at 10 dB on held-out crops
    const untrained = new Coder({ ...QUICK, lambdaPapr: 5e-4 }, new Rng(123, "other-init"));
    const msTrained = evalSet.map((im) => evalAtSnr(a.coder, im, 10, new Rng(4, "e"))).reduce((x, y) => x + y) / evalSet.length;
    const msUntrained = evalSet.map((im) => evalAtSnr(untrained, im, 10, new Rng(4, "e"))).reduce((x, y) => x + y) / evalSet.length;
    expect(msTrained).toBeGreaterThan(msUntrained);

    // graceful degradation: nondecreasing over the evaluation grid within a
    // small monte-carlo allowance (shared noise lane per SNR point)
    const grid = [1, 4, 7, 10, 13];
    const curve = grid.map(
      (snr) =>
        evalSet.map((im) => evalAtSnr(a.coder, im, snr, new Rng(4, "e"))).reduce((x, y) => x + y) /
        evalSet.length,
    );
    for (let i = 1; i < curve.length; i++) expect(curve[i]).toBeGreaterThan(curve[i - 1] - 0.01);

    // trained constellation components stay near-Gaussian: excess kurtosis
    // inside the band frozen from the first measurement of this config
    const kurt = noGrad(() => {
      const p = patchCount(QUICK.cropSize);
      const all: number[] = [];
      for (const im of evalSet.slice(0, 6)) {
        const s = a.coder.encode(tensor(im, [p, PATCH_DIM]));
        for (let i = 0; i < s.size; i++) all.push(s.data[i]);
      }
      const n = all.length;
      const m = all.reduce((x, y) => x + y) / n;
      const v = all.reduce((x, y) => x + (y - m) ** 2, 0) / n;
      const m4 = all.reduce((x, y) => x + (y - m) ** 4, 0) / n;
      return m4 / (v * v) - 3;
    });
    expect(kurt).toBeGreaterThan(-1.0);
    expect(kurt).toBeLessThan(6.0);
  }, 300_000);

  it("divergence aborts with the log attached", () => {
    const cfg = { ...QUICK, epochs: 2 };
    const data = syntheticDataset(cfg.cropSize, 100, cfg.seed);
    const coder = new Coder(cfg, new Rng(cfg.seed, "init"));
    coder.enc[0].w.data[0] = Number.NaN; // poisoned weights -> NaN loss
    let err: unknown = null;
    try {
      train(coder, data, cfg);
    } catch (e) {
      err = e;
    }
    expect(err).toBeInstanceOf(DivergedError);
    expect(Array.isArray((err as DivergedError).log)).toBe(true);
  }, 120_000);

  it("needs a dataset at least one batch long", () => {
    const cfg = { ...QUICK, epochs: 1 };
    const coder = new Coder(cfg, new Rng(1, "init"));
    expect(() => train(coder, syntheticDataset(cfg.cropSize, 4, 1), cfg)).toThrow();
  });
});
