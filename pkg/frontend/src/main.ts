/** Browser entry point: socket wiring, keyboard handling and the draw loop.
 *
 * Query parameters select the server: ?host=…&port=…&mode=watch|play.
 * In play mode one input message is sent per server tick, matching the
 * server's consume-once input handling; holding a key steers continuously
 * because a fresh message goes out every tick.
 */

import { classifyMessage } from "./protocol.js";
import {
  ClientState,
  connectingState,
  disconnectedState,
  handleMessage,
  heldSideFromKeys,
  keyboardToInput,
  resetState,
  withInputHeld,
} from "./state.js";
import { render } from "./render.js";

const params = new URLSearchParams(window.location.search);
const host = params.get("host") ?? window.location.hostname ?? "localhost";
const port = Number(params.get("port") ?? "8765");
const mode = params.get("mode") === "play" ? "play" : "watch";

const canvas = document.getElementById("view") as HTMLCanvasElement;
const statusEl = document.getElementById("status") as HTMLElement;
const ctx = canvas.getContext("2d")!;

let state: ClientState = disconnectedState();
let socket: WebSocket | null = null;
let inputTimer: number | null = null;
let paused = false;
const heldKeys = new Set<string>();

function connect(): void {
  stopInputTimer();
  const url = `ws://${host}:${port}`;
  socket = new WebSocket(url);
  state = connectingState();
  socket.onmessage = (event) => {
    let value: unknown = event.data;
    try {
      value = JSON.parse(event.data as string);
    } catch {
      // leave the raw string; classifyMessage reports it as malformed
    }
    const next = handleMessage(state, value);
    if (next === state) {
      const classified = classifyMessage(value);
      if (classified.kind === "unknown") {
        console.debug(`ignoring unknown message type ${classified.typeName}`);
      }
    } else {
      if (next.phase === "RUNNING" && state.phase === "WAIT_HELLO") {
        onHello(next);
      }
      state = next;
    }
  };
  socket.onclose = () => {
    stopInputTimer();
    if (state.phase !== "ERROR") {
      state = disconnectedState();
    }
  };
  socket.onerror = () => {
    // onclose follows and handles the state change
  };
}

function onHello(next: ClientState): void {
  if (mode === "play" && next.tickHz > 0) {
    startInputTimer(next.tickHz);
  }
}

function startInputTimer(tickHz: number): void {
  stopInputTimer();
  inputTimer = window.setInterval(() => {
    if (socket === null || socket.readyState !== WebSocket.OPEN) {
      return;
    }
    if (state.phase !== "RUNNING" || paused) {
      return;
    }
    socket.send(JSON.stringify(keyboardToInput(heldKeys)));
  }, 1000 / tickHz);
}

function stopInputTimer(): void {
  if (inputTimer !== null) {
    window.clearInterval(inputTimer);
    inputTimer = null;
  }
}

function sendControl(cmd: "reset" | "pause" | "resume"): void {
  if (socket !== null && socket.readyState === WebSocket.OPEN) {
    socket.send(JSON.stringify({ type: "control", cmd }));
  }
}

window.addEventListener("keydown", (event) => {
  if (event.key === "ArrowLeft" || event.key === "ArrowRight") {
    event.preventDefault();
    heldKeys.add(event.key);
    state = withInputHeld(state, heldSideFromKeys(heldKeys));
  } else if (event.key === "r" || event.key === "R") {
    if (mode === "play") {
      sendControl("reset");
      state = resetState(state);
    }
  } else if (event.key === " ") {
    event.preventDefault();
    if (mode === "play") {
      paused = !paused;
      sendControl(paused ? "pause" : "resume");
    }
  } else if (event.key === "c" || event.key === "C") {
    if (state.phase === "DISCONNECTED" || state.phase === "ERROR") {
      connect();
    }
  }
});

window.addEventListener("keyup", (event) => {
  if (event.key === "ArrowLeft" || event.key === "ArrowRight") {
    event.preventDefault();
    heldKeys.delete(event.key);
    state = withInputHeld(state, heldSideFromKeys(heldKeys));
  }
});

function statusLine(): string {
  const base = `ws://${host}:${port}  mode ${mode}  phase ${state.phase}`;
  if (state.phase === "DISCONNECTED" || state.phase === "ERROR") {
    return `${base}  (press C to connect)`;
  }
  if (mode === "play") {
    const pausedNote = paused ? "  [paused]" : "";
    return `${base}${pausedNote}  arrows steer, R resets, space pauses`;
  }
  return base;
}

function frameLoop(): void {
  render(ctx, state);
  statusEl.textContent = statusLine();
  window.requestAnimationFrame(frameLoop);
}

connect();
window.requestAnimationFrame(frameLoop);
