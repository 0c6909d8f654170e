import { describe, expect, it } from "vitest";
import { isBlocked, parseTrk, TrackParseError } from "../src/trk.js";

const TINY = "TRK1\nsize 3 3\nspawn 1.5 1.5 0.0\ngrid\n...\n.#.\n...\n";

describe("parseTrk", () => {
  it("parses a minimal document", () => {
    const track = parseTrk(TINY);
    expect(track.width).toBe(3);
    expect(track.height).toBe(3);
    expect(track.spawn).toEqual({ x: 1.5, y: 1.5, theta: 0 });
    expect(track.checkpoints).toEqual([]);
    expect(Array.from(track.cells)).toEqual([0, 0, 0, 0, 1, 0, 0, 0, 0]);
  });

  it("tolerates a missing trailing newline", () => {
    const track = parseTrk(TINY.trimEnd());
    expect(track.height).toBe(3);
  });

  it("keeps checkpoint order", () => {
    const text =
      "TRK1\nsize 2 2\nspawn 0.5 0.5 90.0\n" +
      "checkpoint 1.0 1.0 0.5\ncheckpoint 0.5 1.5 0.25\ngrid\n..\n..\n";
    const track = parseTrk(text);
    expect(track.checkpoints).toEqual([
      { x: 1, y: 1, radius: 0.5 },
      { x: 0.5, y: 1.5, radius: 0.25 },
    ]);
  });

  it("rejects a bad magic line", () => {
    expect(() => parseTrk("TRK2\nsize 1 1\nspawn 0.5 0.5 0\ngrid\n.\n")).toThrow(
      TrackParseError,
    );
  });

  it("rejects a row count mismatch", () => {
    expect(() => parseTrk("TRK1\nsize 2 3\nspawn 0.5 0.5 0\ngrid\n..\n..\n")).toThrow(
      /2 rows, size says 3/,
    );
  });

  it("rejects a row width mismatch", () => {
    expect(() => parseTrk("TRK1\nsize 2 2\nspawn 0.5 0.5 0\ngrid\n..\n...\n")).toThrow(
      /row 1 has 3 cells/,
    );
  });

  it("rejects invalid cell characters", () => {
    expect(() => parseTrk("TRK1\nsize 2 1\nspawn 0.5 0.5 0\ngrid\n.x\n")).toThrow(
      /invalid cell 'x'/,
    );
  });

  it("rejects unknown header lines", () => {
    expect(() => parseTrk("TRK1\nsize 1 1\nlaps 3\nspawn 0.5 0.5 0\ngrid\n.\n")).toThrow(
      /unknown header line/,
    );
  });

  it("rejects documents without grid, size or spawn", () => {
    expect(() => parseTrk("TRK1\nsize 1 1\nspawn 0.5 0.5 0\n")).toThrow(/missing grid/);
    expect(() => parseTrk("TRK1\nspawn 0.5 0.5 0\ngrid\n")).toThrow(/missing size/);
    expect(() => parseTrk("TRK1\nsize 1 1\ngrid\n.\n")).toThrow(/missing spawn/);
  });
});

describe("isBlocked", () => {
  const track = parseTrk(TINY);

  it("reads the grid", () => {
    expect(isBlocked(track, 1, 1)).toBe(true);
    expect(isBlocked(track, 0, 0)).toBe(false);
  });

  it("treats out-of-bounds as blocked", () => {
    expect(isBlocked(track, -1, 0)).toBe(true);
    expect(isBlocked(track, 0, 3)).toBe(true);
  });
});
