import { execFileSync } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { readSymbolFile, writeSymbolFile } from "../src/symbolfile.js";

function haveFsolink(): boolean {
  try {
    execFileSync("fsolink", ["--help"], { stdio: "ignore" });
    return true;
  } catch {
    return false;
  }
}

describe("symbol file format", () => {
  it("complex round trip is exact in float32", () => {
    const dir = mkdtempSync(join(tmpdir(), "symf-"));
    const path = join(dir, "s.dtat");
    const vals = Float64Array.from([1.5, -2.25, 0.0, 0.0]);
    writeSymbolFile(path, vals, true);
    const back = readSymbolFile(path);
    expect(back.complex).toBe(true);
    expect(Array.from(back.values)).toEqual([1.5, -2.25, 0.0, 0.0]);
  });

  it("rejects bad magic, version, truncation", () => {
    const dir = mkdtempSync(join(tmpdir(), "symf-"));
    const bad = join(dir, "bad.dtat");
    writeFileSync(bad, Buffer.from("NOPE"));
    expect(() => readSymbolFile(bad)).toThrow(/bad magic/);

    const v9 = Buffer.alloc(16);
    v9.write("DTAT", 0, "ascii");
    v9.writeUInt16LE(9, 4);
    writeFileSync(bad, v9);
    expect(() => readSymbolFile(bad)).toThrow(/version/);

    const tr = Buffer.alloc(16 + 4);
    tr.write("DTAT", 0, "ascii");
    tr.writeUInt16LE(1, 4);
    tr.writeUInt16LE(1, 6);
    tr.writeBigUInt64LE(4n, 8);
    writeFileSync(bad, tr);
    expect(() => readSymbolFile(bad)).toThrow(/truncated/);
  });

  it.skipIf(!haveFsolink())("handshakes with the link simulator", () => {
    const dir = mkdtempSync(join(tmpdir(), "symf-"));
    const ours = join(dir, "ours.dtat");
    const theirs = join(dir, "theirs.dtat");
    const vals = Float64Array.from({ length: 64 }, (_v, i) => Math.sin(i) * 0.5);
    writeSymbolFile(ours, vals, true);
    // their CLI reads our file, adds noise, writes its own file back
    execFileSync("fsolink", [
      "channel", "awgn", "--in", ours, "--snr-db", "60", "--seed", "1", "--out", theirs,
    ]);
    const back = readSymbolFile(theirs);
    expect(back.complex).toBe(true);
    expect(back.values.length).toBe(64);
    for (let i = 0; i < 64; i++) {
      expect(Math.abs(back.values[i] - vals[i])).toBeLessThan(0.01);
    }
  });
});
