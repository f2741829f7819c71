/**
 * The symbol-stream exchange format shared with the link simulator:
 * magic "DTAT", u16 version = 1, u16 flags (bit 0 = complex), u64 count,
 * float32 little-endian payload with complex values interleaved I,Q.
 */

import { readFileSync, writeFileSync } from "node:fs";

export interface SymbolFile {
  complex: boolean;
  /** interleaved I,Q when complex; plain values otherwise */
  values: Float32Array;
}

const MAGIC = "DTAT";
const VERSION = 1;

export function writeSymbolFile(path: string, reals: Float64Array, complex: boolean): void {
  if (complex && reals.length % 2 !== 0) throw new Error("complex payload needs even length");
  const count = complex ? reals.length / 2 : reals.length;
  const buf = Buffer.alloc(16 + reals.length * 4);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt16LE(VERSION, 4);
  buf.writeUInt16LE(complex ? 1 : 0, 6);
  buf.writeBigUInt64LE(BigInt(count), 8);
  for (let i = 0; i < reals.length; i++) buf.writeFloatLE(reals[i], 16 + 4 * i);
  writeFileSync(path, buf);
}

export function readSymbolFile(path: string): SymbolFile {
  const buf = readFileSync(path);
  if (buf.length < 4 || buf.toString("ascii", 0, 4) !== MAGIC)
    throw new Error("bad magic");
  if (buf.length < 16) throw new Error("truncated header");
  const version = buf.readUInt16LE(4);
  if (version !== VERSION) throw new Error(`unsupported version ${version}`);
  const complex = (buf.readUInt16LE(6) & 1) === 1;
  const count = Number(buf.readBigUInt64LE(8));
  const n = complex ? 2 * count : count;
  if (buf.length - 16 < n * 4) throw new Error("truncated payload");
  if (buf.length - 16 > n * 4) throw new Error("trailing bytes after payload");
  const values = new Float32Array(n);
  for (let i = 0; i < n; i++) values[i] = buf.readFloatLE(16 + 4 * i);
  return { complex, values };
}
