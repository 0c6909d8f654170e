/** Wire protocol types and validation for the raydrive websocket stream. */

export type Action = 0 | 1 | 2;

export interface HelloMessage {
  type: "hello";
  trk: string;
  tick_hz: number;
  actions: string[];
}

export interface FrameMessage {
  type: "frame";
  t: number;
  x: number;
  y: number;
  theta: number;
  sensors: number[];
  action: Action;
  reward: number;
  score: number;
  terminal: boolean;
  /** Present in some trace-derived streams; never required. */
  epsilon?: number;
}

export interface EndMessage {
  type: "end";
  score: number;
  steps: number;
}

export interface ErrorMessage {
  type: "error";
  msg: string;
}

export type ServerMessage = HelloMessage | FrameMessage | EndMessage | ErrorMessage;

export interface InputMessage {
  type: "input";
  action: Action;
}

export interface ControlMessage {
  type: "control";
  cmd: "reset" | "pause" | "resume";
}

export type ClientMessage = InputMessage | ControlMessage;

/**
 * Sorting a raw decoded JSON value into one of three buckets:
 * a valid protocol message, something well-formed we don't recognize
 * (skipped, forward-compatible), or something malformed (a protocol error).
 */
export type Classified =
  | { kind: "known"; message: ServerMessage }
  | { kind: "unknown"; typeName: string }
  | { kind: "malformed"; reason: string };

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function isFiniteNumber(value: unknown): value is number {
  return typeof value === "number" && Number.isFinite(value);
}

function isNumberArray(value: unknown): value is number[] {
  return Array.isArray(value) && value.every(isFiniteNumber);
}

function isStringArray(value: unknown): value is string[] {
  return Array.isArray(value) && value.every((v) => typeof v === "string");
}

function malformed(reason: string): Classified {
  return { kind: "malformed", reason };
}

export function classifyMessage(value: unknown): Classified {
  if (!isRecord(value)) {
    return malformed("message is not a JSON object");
  }
  const type = value.type;
  if (typeof type !== "string") {
    return malformed("message has no 'type' string");
  }
  switch (type) {
    case "hello": {
      if (typeof value.trk !== "string" || value.trk.length === 0) {
        return malformed("hello.trk must be a non-empty string");
      }
      if (!isFiniteNumber(value.tick_hz) || value.tick_hz <= 0) {
        return malformed("hello.tick_hz must be a positive number");
      }
      if (!isStringArray(value.actions)) {
        return malformed("hello.actions must be a string array");
      }
      return {
        kind: "known",
        message: { type, trk: value.trk, tick_hz: value.tick_hz, actions: value.actions },
      };
    }
    case "frame": {
      for (const field of ["t", "x", "y", "theta", "reward", "score"] as const) {
        if (!isFiniteNumber(value[field])) {
          return malformed(`frame.${field} must be a finite number`);
        }
      }
      if (!isNumberArray(value.sensors)) {
        return malformed("frame.sensors must be a number array");
      }
      if (value.action !== 0 && value.action !== 1 && value.action !== 2) {
        return malformed("frame.action must be 0, 1 or 2");
      }
      if (typeof value.terminal !== "boolean") {
        return malformed("frame.terminal must be a boolean");
      }
      const message: FrameMessage = {
        type,
        t: value.t as number,
        x: value.x as number,
        y: value.y as number,
        theta: value.theta as number,
        sensors: value.sensors,
        action: value.action,
        reward: value.reward as number,
        score: value.score as number,
        terminal: value.terminal,
      };
      if (isFiniteNumber(value.epsilon)) {
        message.epsilon = value.epsilon;
      }
      return { kind: "known", message };
    }
    case "end": {
      if (!isFiniteNumber(value.score) || !isFiniteNumber(value.steps)) {
        return malformed("end.score and end.steps must be finite numbers");
      }
      return { kind: "known", message: { type, score: value.score, steps: value.steps } };
    }
    case "error": {
      if (typeof value.msg !== "string") {
        return malformed("error.msg must be a string");
      }
      return { kind: "known", message: { type, msg: value.msg } };
    }
    default:
      return { kind: "unknown", typeName: type };
  }
}
