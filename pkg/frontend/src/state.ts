/** Pure client state machine for the wire protocol.
 *
 * handleMessage returns the UNCHANGED input state object (same reference)
 * for messages it ignores, so callers can log skipped traffic without the
 * state machine itself doing IO.
 */

import { classifyMessage, type FrameMessage, type InputMessage } from "./protocol.js";
import { parseTrk, TrackParseError, type Track } from "./trk.js";

export type Phase = "DISCONNECTED" | "WAIT_HELLO" | "RUNNING" | "ENDED" | "ERROR";

export type HeldSide = "LEFT" | "RIGHT" | "NONE";

export interface ClientState {
  phase: Phase;
  track: Track | null;
  tickHz: number;
  actionNames: string[];
  latestFrame: FrameMessage | null;
  score: number;
  finalSteps: number | null;
  errorMessage: string | null;
  inputHeld: HeldSide;
}

export function disconnectedState(): ClientState {
  return {
    phase: "DISCONNECTED",
    track: null,
    tickHz: 0,
    actionNames: [],
    latestFrame: null,
    score: 0,
    finalSteps: null,
    errorMessage: null,
    inputHeld: "NONE",
  };
}

/** Fresh state for a newly opened socket; the only road back from ERROR
 * is through here. */
export function connectingState(): ClientState {
  return { ...disconnectedState(), phase: "WAIT_HELLO" };
}

/** Local echo of a reset control message. The server starts a new episode
 * on the same connection without re-sending hello, so the client returns
 * to RUNNING itself, keeping the track it already has. No-op (same
 * reference) outside ENDED. */
export function resetState(state: ClientState): ClientState {
  if (state.phase !== "ENDED") {
    return state;
  }
  return { ...state, phase: "RUNNING", latestFrame: null, score: 0, finalSteps: null };
}

function toError(state: ClientState, message: string): ClientState {
  return { ...state, phase: "ERROR", errorMessage: message };
}

export function handleMessage(state: ClientState, raw: unknown): ClientState {
  const classified = classifyMessage(raw);
  if (classified.kind === "unknown") {
    return state;
  }
  if (classified.kind === "malformed") {
    return state.phase === "ERROR" ? state : toError(state, classified.reason);
  }
  const message = classified.message;
  switch (message.type) {
    case "hello": {
      if (state.phase !== "WAIT_HELLO") {
        return state;
      }
      let track: Track;
      try {
        track = parseTrk(message.trk);
      } catch (err) {
        if (err instanceof TrackParseError) {
          return toError(state, `bad track in hello: ${err.message}`);
        }
        throw err;
      }
      return {
        ...state,
        phase: "RUNNING",
        track,
        tickHz: message.tick_hz,
        actionNames: message.actions,
      };
    }
    case "frame": {
      if (state.phase !== "RUNNING") {
        return state;
      }
      return { ...state, latestFrame: message, score: message.score };
    }
    case "end": {
      if (state.phase !== "RUNNING") {
        return state;
      }
      return { ...state, phase: "ENDED", score: message.score, finalSteps: message.steps };
    }
    case "error": {
      if (state.phase === "ERROR") {
        return state;
      }
      return toError(state, message.msg);
    }
  }
}

export function withInputHeld(state: ClientState, held: HeldSide): ClientState {
  return state.inputHeld === held ? state : { ...state, inputHeld: held };
}

/** Key state -> the input message for this tick. Left and right cancel. */
export function keyboardToInput(keys: ReadonlySet<string>): InputMessage {
  const left = keys.has("ArrowLeft");
  const right = keys.has("ArrowRight");
  if (left && !right) {
    return { type: "input", action: 0 };
  }
  if (right && !left) {
    return { type: "input", action: 1 };
  }
  return { type: "input", action: 2 };
}

export function heldSideFromKeys(keys: ReadonlySet<string>): HeldSide {
  const action = keyboardToInput(keys).action;
  return action === 0 ? "LEFT" : action === 1 ? "RIGHT" : "NONE";
}
