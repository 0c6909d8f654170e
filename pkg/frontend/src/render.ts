/** Canvas renderer: track raster, car, sensor rays and a small HUD.
 *
 * World units map straight onto the canvas (y grows downward in both), so
 * a heading of 90 degrees draws the car pointing toward the bottom of the
 * screen. Geometry constants mirror the simulator defaults; the protocol
 * does not transmit them.
 */

import type { ClientState } from "./state.js";

export const SENSOR_SPACING_DEG = 20;
export const MAX_RAY = 1000;
export const CAR_HALF_LENGTH = 4;
export const CAR_HALF_WIDTH = 2;

export interface Transform {
  scale: number;
  offsetX: number;
  offsetY: number;
}

/** Largest aspect-preserving fit of a width x height world into the canvas. */
export function fitTransform(
  worldW: number,
  worldH: number,
  canvasW: number,
  canvasH: number,
): Transform {
  const scale = Math.min(canvasW / worldW, canvasH / worldH);
  return {
    scale,
    offsetX: (canvasW - worldW * scale) / 2,
    offsetY: (canvasH - worldH * scale) / 2,
  };
}

const COLORS = {
  background: "#10141a",
  free: "#1d2633",
  blocked: "#4a5568",
  checkpoint: "rgba(72, 187, 120, 0.35)",
  car: "#f6ad55",
  carCrashed: "#f56565",
  ray: "rgba(99, 179, 237, 0.8)",
  hud: "#e2e8f0",
};

export function render(ctx: CanvasRenderingContext2D, state: ClientState): void {
  const { width: cw, height: ch } = ctx.canvas;
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, cw, ch);

  if (state.track !== null) {
    const tf = fitTransform(state.track.width, state.track.height, cw, ch - 28);
    ctx.save();
    ctx.translate(tf.offsetX, tf.offsetY + 28);
    ctx.scale(tf.scale, tf.scale);
    drawTrack(ctx, state);
    if (state.latestFrame !== null) {
      drawRays(ctx, state, tf.scale);
      drawCar(ctx, state, tf.scale);
    }
    ctx.restore();
  }
  drawHud(ctx, state);
}

function drawTrack(ctx: CanvasRenderingContext2D, state: ClientState): void {
  const track = state.track!;
  ctx.fillStyle = COLORS.free;
  ctx.fillRect(0, 0, track.width, track.height);
  ctx.fillStyle = COLORS.blocked;
  for (let y = 0; y < track.height; y++) {
    for (let x = 0; x < track.width; x++) {
      if (track.cells[y * track.width + x] === 1) {
        ctx.fillRect(x, y, 1, 1);
      }
    }
  }
  ctx.fillStyle = COLORS.checkpoint;
  for (const cp of track.checkpoints) {
    ctx.beginPath();
    ctx.arc(cp.x, cp.y, cp.radius, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function drawCar(ctx: CanvasRenderingContext2D, state: ClientState, scale: number): void {
  const frame = state.latestFrame!;
  ctx.save();
  ctx.translate(frame.x, frame.y);
  ctx.rotate((frame.theta * Math.PI) / 180);
  ctx.fillStyle = frame.terminal ? COLORS.carCrashed : COLORS.car;
  ctx.fillRect(-CAR_HALF_LENGTH, -CAR_HALF_WIDTH, 2 * CAR_HALF_LENGTH, 2 * CAR_HALF_WIDTH);
  ctx.strokeStyle = COLORS.background;
  ctx.lineWidth = 1 / scale;
  ctx.strokeRect(-CAR_HALF_LENGTH, -CAR_HALF_WIDTH, 2 * CAR_HALF_LENGTH, 2 * CAR_HALF_WIDTH);
  ctx.restore();
}

function drawRays(ctx: CanvasRenderingContext2D, state: ClientState, scale: number): void {
  const frame = state.latestFrame!;
  const headingRad = (frame.theta * Math.PI) / 180;
  const noseX = frame.x + CAR_HALF_LENGTH * Math.cos(headingRad);
  const noseY = frame.y + CAR_HALF_LENGTH * Math.sin(headingRad);
  const half = Math.floor(frame.sensors.length / 2);
  ctx.strokeStyle = COLORS.ray;
  ctx.lineWidth = 0.8 / scale;
  for (let k = 0; k < frame.sensors.length; k++) {
    const angle = ((frame.theta + (k - half) * SENSOR_SPACING_DEG) * Math.PI) / 180;
    const length = frame.sensors[k] * MAX_RAY;
    ctx.beginPath();
    ctx.moveTo(noseX, noseY);
    ctx.lineTo(noseX + length * Math.cos(angle), noseY + length * Math.sin(angle));
    ctx.stroke();
  }
}

function drawHud(ctx: CanvasRenderingContext2D, state: ClientState): void {
  ctx.fillStyle = COLORS.hud;
  ctx.font = "14px system-ui, sans-serif";
  ctx.textBaseline = "top";
  const parts = [`phase ${state.phase}`, `score ${state.score}`];
  const frame = state.latestFrame;
  if (frame !== null) {
    parts.push(`t ${frame.t}`, `reward ${frame.reward}`);
    if (frame.epsilon !== undefined) {
      parts.push(`epsilon ${frame.epsilon.toFixed(4)}`);
    }
    if (frame.terminal) {
      parts.push("CRASHED");
    }
  }
  if (state.phase === "ENDED" && state.finalSteps !== null) {
    parts.push(`steps ${state.finalSteps}`);
  }
  if (state.phase === "ERROR" && state.errorMessage !== null) {
    parts.push(`error: ${state.errorMessage}`);
  }
  ctx.fillText(parts.join("   "), 8, 7);
}
