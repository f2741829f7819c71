/**
 * Trainer CLI: train a coder, encode images to symbol files, decode symbol
 * files back to images, and generate synthetic crop datasets.
 */

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { dirname, join } from "node:path";

import { loadPpmDataset, syntheticCrop, syntheticDataset } from "./dataset.js";
import { fromPatches, patchCount, readPpm, toPatches, writePpm, PATCH_DIM } from "./image.js";
import { Coder, DEFAULT_CONFIG, TrainerConfig, loadModel, saveModel, symbolsPerImage } from "./model.js";
import { Rng } from "./rng.js";
import { readSymbolFile, writeSymbolFile } from "./symbolfile.js";
import { evalAtSnr, meanPapr, train } from "./train.js";
import { noGrad, tensor } from "./tensor.js";

function parseArgs(argv: string[]): { cmd: string; opts: Map<string, string[]> } {
  const [cmd, ...rest] = argv;
  const opts = new Map<string, string[]>();
  let key: string | null = null;
  for (const a of rest) {
    if (a.startsWith("--")) {
      key = a.slice(2);
      opts.set(key, []);
    } else {
      if (key === null) throw new Error(`unexpected argument ${a}`);
      opts.get(key)!.push(a);
    }
  }
  return { cmd, opts };
}

function one(opts: Map<string, string[]>, key: string, fallback?: string): string {
  const v = opts.get(key);
  if (!v || v.length === 0) {
    if (fallback !== undefined) return fallback;
    throw new Error(`missing --${key}`);
  }
  return v[0];
}

function cmdTrain(opts: Map<string, string[]>): void {
  const cfg: TrainerConfig = { ...DEFAULT_CONFIG };
  const cfgPath = opts.get("config")?.[0];
  if (cfgPath) Object.assign(cfg, JSON.parse(readFileSync(cfgPath, "utf8")));
  if (opts.has("lambda")) cfg.lambdaPapr = parseFloat(one(opts, "lambda"));
  if (opts.has("epochs")) cfg.epochs = parseInt(one(opts, "epochs"), 10);
  if (opts.has("seed")) cfg.seed = parseInt(one(opts, "seed"), 10);

  const datasetDir = opts.get("dataset")?.[0];
  const data = datasetDir
    ? loadPpmDataset(datasetDir, cfg.cropSize)
    : syntheticDataset(cfg.cropSize, 128, cfg.seed);
  if (data.length < 100) throw new Error("need at least 100 crops");

  const coder = new Coder(cfg, new Rng(cfg.seed, "init"));
  const t0 = Date.now();
  const logs = train(coder, data, cfg, (log) =>
    console.log(
      `epoch ${log.epoch}: loss ${log.loss.toFixed(4)} ms-ssim ${log.msSsim.toFixed(4)} ` +
      `papr ${log.papr.toFixed(2)}`,
    ),
  );
  const out = one(opts, "out");
  saveModel(out, coder, { epochs: logs, trainSeconds: (Date.now() - t0) / 1000 });
  console.log(`saved model to ${out} (${symbolsPerImage(cfg)} complex symbols per image)`);
}

function cmdEncode(opts: Map<string, string[]>): void {
  const coder = loadModel(one(opts, "model"));
  const images = opts.get("images") ?? [];
  if (images.length === 0) throw new Error("missing --images");
  const reals: number[] = [];
  noGrad(() => {
    for (const path of images) {
      const patches = toPatches(readPpm(path));
      const p = patchCount(coder.cfg.cropSize);
      const s = coder.encode(tensor(patches, [p, PATCH_DIM]));
      for (let i = 0; i < s.size; i++) reals.push(s.data[i]);
    }
  });
  const out = one(opts, "out");
  writeSymbolFile(out, Float64Array.from(reals), true);
  const meta = {
    crop_size: coder.cfg.cropSize,
    images: images.length,
    complex_symbols_per_image: symbolsPerImage(coder.cfg),
  };
  writeFileSync(out + ".json", JSON.stringify(meta, null, 1) + "\n");
  console.log(`wrote ${reals.length / 2} complex symbols to ${out}`);
}

function cmdDecode(opts: Map<string, string[]>): void {
  const coder = loadModel(one(opts, "model"));
  // --noise-var is accepted for interface parity with the linear mapper; the
  // learned decoder is SNR-agnostic (trained across the whole range)
  void opts.get("noise-var");
  const file = readSymbolFile(one(opts, "in"));
  if (!file.complex) throw new Error("expected a complex symbol file");
  const perImage = symbolsPerImage(coder.cfg) * 2;
  if (file.values.length % perImage !== 0)
    throw new Error("symbol count is not a whole number of images");
  const nImages = file.values.length / perImage;
  const outPrefix = one(opts, "out");
  mkdirSync(dirname(outPrefix) || ".", { recursive: true });
  noGrad(() => {
    for (let k = 0; k < nImages; k++) {
      const chunk = Float64Array.from(file.values.subarray(k * perImage, (k + 1) * perImage));
      const rows = patchCount(coder.cfg.cropSize);
      const xhat = coder.decode(tensor(chunk, [chunk.length]), rows);
      const img = fromPatches(Float64Array.from(xhat.data), coder.cfg.cropSize);
      const path = nImages === 1 ? `${outPrefix}.ppm` : `${outPrefix}_${k}.ppm`;
      writePpm(path, img);
      console.log(path);
    }
  });
}

function cmdMakeDataset(opts: Map<string, string[]>): void {
  const dir = one(opts, "out");
  const count = parseInt(one(opts, "count", "128"), 10);
  const size = parseInt(one(opts, "size", "32"), 10);
  const seed = parseInt(one(opts, "seed", "7"), 10);
  mkdirSync(dir, { recursive: true });
  for (let i = 0; i < count; i++) {
    writePpm(join(dir, `crop_${String(i).padStart(4, "0")}.ppm`), syntheticCrop(size, seed * 10007 + i));
  }
  console.log(`wrote ${count} ${size}x${size} crops to ${dir}`);
}

function cmdEval(opts: Map<string, string[]>): void {
  const coder = loadModel(one(opts, "model"));
  const img = toPatches(readPpm(one(opts, "image")));
  for (const snr of (opts.get("snrs") ?? ["1", "4", "7", "10", "13"]).map(Number)) {
    const ms = evalAtSnr(coder, img, snr, new Rng(1, `eval/${snr}`));
    console.log(`snr ${snr} dB: ms-ssim ${ms.toFixed(4)}`);
  }
  console.log(`mean papr (this image): ${meanPapr(coder, [img]).toFixed(3)}`);
}

export function main(argv: string[]): number {
  const { cmd, opts } = parseArgs(argv);
  switch (cmd) {
    case "train":
      cmdTrain(opts);
      return 0;
    case "encode":
      cmdEncode(opts);
      return 0;
    case "decode":
      cmdDecode(opts);
      return 0;
    case "make-dataset":
      cmdMakeDataset(opts);
      return 0;
    case "eval":
      cmdEval(opts);
      return 0;
    default:
      console.error(
        "usage: cli.js train|encode|decode|eval|make-dataset [--options]\n" +
        "  train --out DIR [--config cfg.json] [--dataset DIR] [--lambda X] [--epochs N] [--seed N]\n" +
        "  encode --model DIR --images a.ppm [b.ppm ...] --out stream.dtat\n" +
        "  decode --model DIR --in stream.dtat [--noise-var V] --out prefix\n" +
        "  eval --model DIR --image a.ppm [--snrs 1 4 7 10 13]\n" +
        "  make-dataset --out DIR [--count N] [--size S] [--seed N]",
      );
      return 2;
  }
}

main(process.argv.slice(2));
