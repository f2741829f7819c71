/**
 * Minimal reverse-mode autodiff over Float64Array storage.
 *
 * A global tape records a backward closure per operation; backward() replays
 * it in reverse. Only the ops the coder actually needs are implemented:
 * dense matmul, bias add, elementwise arithmetic, GELU/sigmoid, reductions
 * (sum/mean/max), a valid-mode 2-D convolution with a constant kernel, 2x2
 * average pooling, and an index-map gather for patch/image reshuffling.
 */

type BackwardFn = () => void;

let tape: BackwardFn[] | null = [];

export function noGrad<T>(fn: () => T): T {
  const saved = tape;
  tape = null;
  try {
    return fn();
  } finally {
    tape = saved;
  }
}

function record(fn: BackwardFn): void {
  if (tape !== null) tape.push(fn);
}

export class Tensor {
  data: Float64Array;
  shape: number[];
  grad: Float64Array | null;

  constructor(data: Float64Array, shape: number[], needsGrad: boolean) {
    this.data = data;
    this.shape = shape;
    this.grad = needsGrad && tape !== null ? new Float64Array(data.length) : null;
  }

  get size(): number {
    return this.data.length;
  }

  item(): number {
    if (this.size !== 1) throw new Error("item() needs a scalar tensor");
    return this.data[0];
  }
}

export function tensor(values: ArrayLike<number>, shape: number[]): Tensor {
  const n = shape.reduce((a, b) => a * b, 1);
  if (values.length !== n) throw new Error("shape does not match data length");
  return new Tensor(Float64Array.from(values), shape, false);
}

export function param(values: Float64Array, shape: number[]): Tensor {
  const t = new Tensor(values, shape, true);
  if (t.grad === null) t.grad = new Float64Array(values.length);
  return t;
}

export function zeroGrads(params: Tensor[]): void {
  for (const p of params) p.grad?.fill(0);
}

/** Run accumulated backward closures, seeding d(loss)/d(loss) = 1. */
export function backward(loss: Tensor): void {
  if (tape === null) throw new Error("backward() inside noGrad");
  if (loss.size !== 1) throw new Error("loss must be scalar");
  if (loss.grad === null) throw new Error("loss does not require grad");
  loss.grad[0] = 1;
  for (let i = tape.length - 1; i >= 0; i--) tape[i]();
  tape.length = 0;
}

export function clearTape(): void {
  if (tape !== null) tape.length = 0;
}

function needs(...ts: Tensor[]): boolean {
  return ts.some((t) => t.grad !== null);
}

/** C = A @ B for A (m,k), B (k,n). */
export function matmul(a: Tensor, b: Tensor): Tensor {
  const [m, k] = a.shape;
  const [k2, n] = b.shape;
  if (k !== k2) throw new Error("matmul shape mismatch");
  const out = new Tensor(new Float64Array(m * n), [m, n], needs(a, b));
  const ad = a.data, bd = b.data, od = out.data;
  for (let i = 0; i < m; i++) {
    const arow = i * k;
    const orow = i * n;
    for (let p = 0; p < k; p++) {
      const av = ad[arow + p];
      if (av === 0) continue;
      const brow = p * n;
      for (let j = 0; j < n; j++) od[orow + j] += av * bd[brow + j];
    }
  }
  if (out.grad) {
    record(() => {
      const og = out.grad!;
      if (a.grad) {
        const ag = a.grad;
        for (let i = 0; i < m; i++) {
          for (let p = 0; p < k; p++) {
            let acc = 0;
            const brow = p * n, orow = i * n;
            for (let j = 0; j < n; j++) acc += og[orow + j] * bd[brow + j];
            ag[i * k + p] += acc;
          }
        }
      }
      if (b.grad) {
        const bg = b.grad;
        for (let p = 0; p < k; p++) {
          for (let i = 0; i < m; i++) {
            const av = ad[i * k + p];
            if (av === 0) continue;
            const orow = i * n, brow = p * n;
            for (let j = 0; j < n; j++) bg[brow + j] += av * og[orow + j];
          }
        }
      }
    });
  }
  return out;
}

/** Add a (n,) bias to every row of (m,n). */
export function addBias(x: Tensor, bias: Tensor): Tensor {
  const [m, n] = x.shape;
  if (bias.size !== n) throw new Error("bias size mismatch");
  const out = new Tensor(new Float64Array(x.size), x.shape.slice(), needs(x, bias));
  for (let i = 0; i < m; i++)
    for (let j = 0; j < n; j++) out.data[i * n + j] = x.data[i * n + j] + bias.data[j];
  if (out.grad) {
    record(() => {
      const og = out.grad!;
      if (x.grad) for (let i = 0; i < x.size; i++) x.grad[i] += og[i];
      if (bias.grad)
        for (let i = 0; i < m; i++)
          for (let j = 0; j < n; j++) bias.grad[j] += og[i * n + j];
    });
  }
  return out;
}

function elementwise(
  xs: Tensor[],
  f: (vals: number[]) => number,
  dfs: ((vals: number[], out: number) => number)[],
  shape: number[],
): Tensor {
  const n = shape.reduce((a, b) => a * b, 1);
  const out = new Tensor(new Float64Array(n), shape, needs(...xs));
  const vals = new Array(xs.length);
  for (let i = 0; i < n; i++) {
    for (let t = 0; t < xs.length; t++) vals[t] = xs[t].data[i];
    out.data[i] = f(vals);
  }
  if (out.grad) {
    record(() => {
      const og = out.grad!;
      const v = new Array(xs.length);
      for (let i = 0; i < n; i++) {
        for (let t = 0; t < xs.length; t++) v[t] = xs[t].data[i];
        for (let t = 0; t < xs.length; t++) {
          const g = xs[t].grad;
          if (g) g[i] += og[i] * dfs[t](v, out.data[i]);
        }
      }
    });
  }
  return out;
}

export function add(a: Tensor, b: Tensor): Tensor {
  return elementwise([a, b], (v) => v[0] + v[1], [() => 1, () => 1], a.shape.slice());
}

export function sub(a: Tensor, b: Tensor): Tensor {
  return elementwise([a, b], (v) => v[0] - v[1], [() => 1, () => -1], a.shape.slice());
}

export function mul(a: Tensor, b: Tensor): Tensor {
  return elementwise([a, b], (v) => v[0] * v[1], [(v) => v[1], (v) => v[0]], a.shape.slice());
}

export function div(a: Tensor, b: Tensor): Tensor {
  return elementwise(
    [a, b],
    (v) => v[0] / v[1],
    [(v) => 1 / v[1], (v) => -v[0] / (v[1] * v[1])],
    a.shape.slice(),
  );
}

export function scale(x: Tensor, c: number): Tensor {
  return elementwise([x], (v) => v[0] * c, [() => c], x.shape.slice());
}

export function addScalar(x: Tensor, c: number): Tensor {
  return elementwise([x], (v) => v[0] + c, [() => 1], x.shape.slice());
}

export function square(x: Tensor): Tensor {
  return elementwise([x], (v) => v[0] * v[0], [(v) => 2 * v[0]], x.shape.slice());
}

export function sqrtT(x: Tensor): Tensor {
  return elementwise([x], (v) => Math.sqrt(v[0]), [(_v, o) => 0.5 / o], x.shape.slice());
}

/** max(x, lo) with zero gradient on the clamped side. */
export function clampMin(x: Tensor, lo: number): Tensor {
  return elementwise(
    [x],
    (v) => (v[0] < lo ? lo : v[0]),
    [(v) => (v[0] < lo ? 0 : 1)],
    x.shape.slice(),
  );
}

export function expT(x: Tensor): Tensor {
  return elementwise([x], (v) => Math.exp(v[0]), [(_v, o) => o], x.shape.slice());
}

export function logT(x: Tensor): Tensor {
  return elementwise([x], (v) => Math.log(v[0]), [(v) => 1 / v[0]], x.shape.slice());
}

const GELU_C = Math.sqrt(2 / Math.PI);

export function gelu(x: Tensor): Tensor {
  return elementwise(
    [x],
    (v) => 0.5 * v[0] * (1 + Math.tanh(GELU_C * (v[0] + 0.044715 * v[0] ** 3))),
    [
      (v) => {
        const u = GELU_C * (v[0] + 0.044715 * v[0] ** 3);
        const t = Math.tanh(u);
        const du = GELU_C * (1 + 3 * 0.044715 * v[0] * v[0]);
        return 0.5 * (1 + t) + 0.5 * v[0] * (1 - t * t) * du;
      },
    ],
    x.shape.slice(),
  );
}

export function sigmoid(x: Tensor): Tensor {
  return elementwise(
    [x],
    (v) => 1 / (1 + Math.exp(-v[0])),
    [(_v, o) => o * (1 - o)],
    x.shape.slice(),
  );
}

export function sum(x: Tensor): Tensor {
  let acc = 0;
  for (let i = 0; i < x.size; i++) acc += x.data[i];
  const out = new Tensor(Float64Array.of(acc), [], needs(x));
  if (out.grad) {
    record(() => {
      const g = out.grad![0];
      if (x.grad) for (let i = 0; i < x.size; i++) x.grad[i] += g;
    });
  }
  return out;
}

export function mean(x: Tensor): Tensor {
  return scale(sum(x), 1 / x.size);
}

/** Max over all entries; the gradient routes to the (first) argmax. */
export function maxAll(x: Tensor): Tensor {
  let best = -Infinity;
  let arg = 0;
  for (let i = 0; i < x.size; i++)
    if (x.data[i] > best) {
      best = x.data[i];
      arg = i;
    }
  const out = new Tensor(Float64Array.of(best), [], needs(x));
  if (out.grad) {
    record(() => {
      if (x.grad) x.grad[arg] += out.grad![0];
    });
  }
  return out;
}

/** Multiply every entry of x by a scalar tensor s (broadcast). */
export function mulScalarT(x: Tensor, s: Tensor): Tensor {
  if (s.size !== 1) throw new Error("mulScalarT needs a scalar second operand");
  const out = new Tensor(new Float64Array(x.size), x.shape.slice(), needs(x, s));
  const sv = s.data[0];
  for (let i = 0; i < x.size; i++) out.data[i] = x.data[i] * sv;
  if (out.grad) {
    record(() => {
      const og = out.grad!;
      if (x.grad) for (let i = 0; i < x.size; i++) x.grad[i] += og[i] * sv;
      if (s.grad) {
        let acc = 0;
        for (let i = 0; i < x.size; i++) acc += og[i] * x.data[i];
        s.grad[0] += acc;
      }
    });
  }
  return out;
}

export function reshape(x: Tensor, shape: number[]): Tensor {
  const n = shape.reduce((a, b) => a * b, 1);
  if (n !== x.size) throw new Error("reshape size mismatch");
  const out = new Tensor(x.data, shape, false);
  out.grad = x.grad; // same storage, gradients flow through untouched
  return out;
}

/** out[i] = x[indexMap[i]]; indexMap must be a permutation or injection. */
export function gather(x: Tensor, indexMap: Int32Array, shape: number[]): Tensor {
  const out = new Tensor(new Float64Array(indexMap.length), shape, needs(x));
  for (let i = 0; i < indexMap.length; i++) out.data[i] = x.data[indexMap[i]];
  if (out.grad) {
    record(() => {
      if (x.grad)
        for (let i = 0; i < indexMap.length; i++) x.grad[indexMap[i]] += out.grad![i];
    });
  }
  return out;
}

/** Valid-mode correlation of (B,H,W) with one constant (k,k) kernel. */
export function conv2dValid(x: Tensor, kernel: Float64Array, k: number): Tensor {
  const [b, h, w] = x.shape;
  const oh = h - k + 1;
  const ow = w - k + 1;
  if (oh <= 0 || ow <= 0) throw new Error("kernel larger than image");
  const out = new Tensor(new Float64Array(b * oh * ow), [b, oh, ow], needs(x));
  const xd = x.data, od = out.data;
  for (let bi = 0; bi < b; bi++) {
    const xb = bi * h * w;
    const ob = bi * oh * ow;
    for (let i = 0; i < oh; i++) {
      for (let j = 0; j < ow; j++) {
        let acc = 0;
        for (let u = 0; u < k; u++) {
          const row = xb + (i + u) * w + j;
          const krow = u * k;
          for (let v = 0; v < k; v++) acc += xd[row + v] * kernel[krow + v];
        }
        od[ob + i * ow + j] = acc;
      }
    }
  }
  if (out.grad) {
    record(() => {
      if (!x.grad) return;
      const og = out.grad!, xg = x.grad;
      for (let bi = 0; bi < b; bi++) {
        const xb = bi * h * w;
        const ob = bi * oh * ow;
        for (let i = 0; i < oh; i++) {
          for (let j = 0; j < ow; j++) {
            const g = og[ob + i * ow + j];
            if (g === 0) continue;
            for (let u = 0; u < k; u++) {
              const row = xb + (i + u) * w + j;
              const krow = u * k;
              for (let v = 0; v < k; v++) xg[row + v] += g * kernel[krow + v];
            }
          }
        }
      }
    });
  }
  return out;
}

/** 2x2 mean pooling over (B,H,W) with even H, W. */
export function avgPool2(x: Tensor): Tensor {
  const [b, h, w] = x.shape;
  const oh = h >> 1, ow = w >> 1;
  const out = new Tensor(new Float64Array(b * oh * ow), [b, oh, ow], needs(x));
  for (let bi = 0; bi < b; bi++)
    for (let i = 0; i < oh; i++)
      for (let j = 0; j < ow; j++) {
        const p = bi * h * w + 2 * i * w + 2 * j;
        out.data[bi * oh * ow + i * ow + j] =
          0.25 * (x.data[p] + x.data[p + 1] + x.data[p + w] + x.data[p + w + 1]);
      }
  if (out.grad) {
    record(() => {
      if (!x.grad) return;
      for (let bi = 0; bi < b; bi++)
        for (let i = 0; i < oh; i++)
          for (let j = 0; j < ow; j++) {
            const g = 0.25 * out.grad![bi * oh * ow + i * ow + j];
            const p = bi * h * w + 2 * i * w + 2 * j;
            x.grad[p] += g;
            x.grad[p + 1] += g;
            x.grad[p + w] += g;
            x.grad[p + w + 1] += g;
          }
    });
  }
  return out;
}
