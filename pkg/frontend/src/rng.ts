/**
 * Deterministic PRNG (splitmix64 core) with a Box-Muller normal source.
 * Every stochastic piece of the trainer draws from one of these so that a
 * (seed, lane) pair fully determines a run.
 */

export class Rng {
  private state: bigint;
  private spare: number | null = null;

  constructor(seed: number, lane = "") {
    let h = BigInt(seed >>> 0) ^ 0x9e3779b97f4a7c15n;
    for (const ch of lane) {
      h = (h ^ BigInt(ch.charCodeAt(0))) * 0xbf58476d1ce4e5b9n;
      h &= 0xffffffffffffffffn;
    }
    this.state = h;
  }

  /** Uniform in [0, 1). */
  next(): number {
    this.state = (this.state + 0x9e3779b97f4a7c15n) & 0xffffffffffffffffn;
    let z = this.state;
    z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & 0xffffffffffffffffn;
    z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & 0xffffffffffffffffn;
    z = z ^ (z >> 31n);
    return Number(z >> 11n) / 9007199254740992;
  }

  /** Standard normal draw. */
  normal(): number {
    if (this.spare !== null) {
      const v = this.spare;
      this.spare = null;
      return v;
    }
    let u = 0;
    let v = 0;
    do {
      u = this.next();
    } while (u <= 1e-12);
    v = this.next();
    const r = Math.sqrt(-2 * Math.log(u));
    this.spare = r * Math.sin(2 * Math.PI * v);
    return r * Math.cos(2 * Math.PI * v);
  }

  uniform(lo: number, hi: number): number {
    return lo + (hi - lo) * this.next();
  }

  int(n: number): number {
    return Math.floor(this.next() * n);
  }

  fillNormal(out: Float64Array, scale = 1): void {
    for (let i = 0; i < out.length; i++) out[i] = this.normal() * scale;
  }
}
