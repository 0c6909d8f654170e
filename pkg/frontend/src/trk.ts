/** Parser for TRK1 track text as embedded in hello messages and traces. */

export interface Checkpoint {
  x: number;
  y: number;
  radius: number;
}

export interface Spawn {
  x: number;
  y: number;
  theta: number;
}

export interface Track {
  width: number;
  height: number;
  /** Row-major, true = blocked. cells[y * width + x]. */
  cells: Uint8Array;
  spawn: Spawn;
  checkpoints: Checkpoint[];
}

export class TrackParseError extends Error {}

function parseNumber(token: string | undefined, what: string): number {
  const value = Number(token);
  if (token === undefined || token === "" || !Number.isFinite(value)) {
    throw new TrackParseError(`${what}: expected a finite number, got ${token}`);
  }
  return value;
}

function parseInteger(token: string | undefined, what: string): number {
  const value = parseNumber(token, what);
  if (!Number.isInteger(value) || value < 1) {
    throw new TrackParseError(`${what}: expected a positive integer, got ${token}`);
  }
  return value;
}

export function parseTrk(text: string): Track {
  const lines = text.split("\n");
  if (lines[lines.length - 1] === "") {
    lines.pop(); // trailing newline
  }
  if (lines[0] !== "TRK1") {
    throw new TrackParseError(`bad magic line: ${lines[0]}`);
  }

  let width = 0;
  let height = 0;
  let spawn: Spawn | null = null;
  const checkpoints: Checkpoint[] = [];
  let i = 1;
  for (; i < lines.length && lines[i] !== "grid"; i++) {
    const tokens = lines[i].split(" ");
    switch (tokens[0]) {
      case "size":
        width = parseInteger(tokens[1], "size width");
        height = parseInteger(tokens[2], "size height");
        break;
      case "spawn":
        spawn = {
          x: parseNumber(tokens[1], "spawn x"),
          y: parseNumber(tokens[2], "spawn y"),
          theta: parseNumber(tokens[3], "spawn theta"),
        };
        break;
      case "checkpoint":
        checkpoints.push({
          x: parseNumber(tokens[1], "checkpoint x"),
          y: parseNumber(tokens[2], "checkpoint y"),
          radius: parseNumber(tokens[3], "checkpoint radius"),
        });
        break;
      default:
        throw new TrackParseError(`unknown header line: ${lines[i]}`);
    }
  }
  if (i === lines.length) {
    throw new TrackParseError("missing grid section");
  }
  if (width === 0 || height === 0) {
    throw new TrackParseError("missing size line");
  }
  if (spawn === null) {
    throw new TrackParseError("missing spawn line");
  }

  const rows = lines.slice(i + 1);
  if (rows.length !== height) {
    throw new TrackParseError(`grid has ${rows.length} rows, size says ${height}`);
  }
  const cells = new Uint8Array(width * height);
  for (let y = 0; y < height; y++) {
    if (rows[y].length !== width) {
      throw new TrackParseError(`grid row ${y} has ${rows[y].length} cells, size says ${width}`);
    }
    for (let x = 0; x < width; x++) {
      const ch = rows[y][x];
      if (ch !== "." && ch !== "#") {
        throw new TrackParseError(`grid row ${y} has invalid cell '${ch}'`);
      }
      cells[y * width + x] = ch === "#" ? 1 : 0;
    }
  }
  return { width, height, cells, spawn, checkpoints };
}

export function isBlocked(track: Track, x: number, y: number): boolean {
  if (x < 0 || y < 0 || x >= track.width || y >= track.height) {
    return true;
  }
  return track.cells[y * track.width + x] === 1;
}
