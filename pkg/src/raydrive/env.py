"""Fixed-step car simulation: kinematics, collision, reward, forward sensors.

Dynamics are fully deterministic: turn first, then advance at constant speed
along the new heading. A step earns reward_alive unless the moved footprint
overlaps a blocked cell, which earns reward_crash and ends the episode.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import kernels
from .trackmap import Pose, SpawnOccupied, TrackSpec, unit_vector


class Action(IntEnum):
    LEFT = 0
    RIGHT = 1
    NOOP = 2


class SteppedWhenTerminal(RuntimeError):
    """step() called after the episode ended."""


@dataclass(frozen=True)
class EnvConfig:
    """Simulation constants. Defaults give 7 rays fanned 20 degrees apart."""

    n_sensors: int = 7
    sensor_spacing: float = 20.0
    max_ray: int = 1000
    speed: float = 5.0
    turn_rate: float = 5.0
    max_steps: int = 5000
    reward_alive: int = 5
    reward_crash: int = -20
    car_half_length: float = 4.0
    car_half_width: float = 2.0

    def __post_init__(self):
        if self.n_sensors < 1 or self.n_sensors % 2 == 0:
            raise ValueError(f"n_sensors must be odd and >= 1, got {self.n_sensors}")
        if self.sensor_spacing <= 0:
            raise ValueError(f"sensor_spacing must be > 0, got {self.sensor_spacing}")
        if self.max_ray < 1:
            raise ValueError(f"max_ray must be >= 1, got {self.max_ray}")
        if self.speed <= 0:
            raise ValueError(f"speed must be > 0, got {self.speed}")
        if self.turn_rate < 0:
            raise ValueError(f"turn_rate must be >= 0, got {self.turn_rate}")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.car_half_length <= 0 or self.car_half_width <= 0:
            raise ValueError("car half extents must be > 0, got "
                             f"{self.car_half_length}x{self.car_half_width}")


@dataclass
class CarState:
    """Mutable per-episode bookkeeping owned by CarEnv."""

    pose: Pose
    steps_taken: int = 0
    score: int = 0
    alive: bool = True
    next_checkpoint: int = 0
    laps: int = 0


@dataclass(frozen=True)
class StepResult:
    """Everything an agent sees after one transition (or after reset)."""

    observation: np.ndarray
    reward: int
    terminal: bool
    steps: int
    score: int
    lap_completed: bool
    truncated: bool = False


def footprint_points(pose: Pose, config: EnvConfig) -> tuple[np.ndarray, np.ndarray]:
    """Nine sample points of the oriented car rectangle: corners, edge
    midpoints and center."""
    dx, dy = unit_vector(pose.theta)
    hl, hw = config.car_half_length, config.car_half_width
    xs = np.empty(9, dtype=np.float64)
    ys = np.empty(9, dtype=np.float64)
    i = 0
    for a in (-1.0, 0.0, 1.0):
        for b in (-1.0, 0.0, 1.0):
            xs[i] = pose.x + a * hl * dx - b * hw * dy
            ys[i] = pose.y + a * hl * dy + b * hw * dx
            i += 1
    return xs, ys


def collides(pose: Pose, track: TrackSpec, config: EnvConfig) -> bool:
    """True when any footprint sample point lands in a blocked cell."""
    xs, ys = footprint_points(pose, config)
    return bool(kernels.any_occupied(track.grid.cells, xs, ys))


def nose_point(pose: Pose, config: EnvConfig) -> tuple[float, float]:
    dx, dy = unit_vector(pose.theta)
    return pose.x + config.car_half_length * dx, pose.y + config.car_half_length * dy


def get_game_state(pose: Pose, track: TrackSpec, config: EnvConfig) -> np.ndarray:
    """Sensor observation: n_sensors ray distances from the car nose, fanned
    symmetrically around the heading, each normalized by max_ray into [0, 1].
    Index 0 is the leftmost ray (most negative angle offset)."""
    nx, ny = nose_point(pose, config)
    mid = config.n_sensors // 2
    dxs = np.empty(config.n_sensors, dtype=np.float64)
    dys = np.empty(config.n_sensors, dtype=np.float64)
    for k in range(config.n_sensors):
        ux, uy = unit_vector(pose.theta + (k - mid) * config.sensor_spacing)
        dxs[k] = ux
        dys[k] = uy
    raw = kernels.ray_march_multi(track.grid.cells, nx, ny, dxs, dys, 1.0, config.max_ray)
    return raw.astype(np.float64) / config.max_ray


class CarEnv:
    """Single-car episode simulator over an immutable track.

    reset() -> StepResult, then step(action) until the result is terminal.
    Identical action sequences always produce identical results.
    """

    def __init__(self, track: TrackSpec, config: EnvConfig | None = None):
        self.track = track
        self.config = config if config is not None else EnvConfig()
        self.state: CarState | None = None
        self.seed = 0
        self._terminal = True
        self._passed_last = False
        self._inside_next = False

    def reset(self, seed: int = 0) -> StepResult:
        spawn = self.track.spawn
        if self.track.grid.is_occupied(spawn.x, spawn.y):
            raise SpawnOccupied(f"spawn ({spawn.x}, {spawn.y}) lands in an occupied cell")
        self.seed = seed  # recorded in traces; the dynamics themselves are deterministic
        self.state = CarState(pose=spawn)
        self._terminal = False
        self._passed_last = False
        self._inside_next = False
        obs = get_game_state(spawn, self.track, self.config)
        return StepResult(obs, 0, False, 0, 0, False, False)

    def step(self, action) -> StepResult:
        st = self.state
        if st is None or self._terminal:
            raise SteppedWhenTerminal("episode is over; call reset() first")
        cfg = self.config
        action = Action(action)

        theta = st.pose.theta
        if action == Action.RIGHT:
            theta = theta + cfg.turn_rate
        elif action == Action.LEFT:
            theta = theta - cfg.turn_rate
        dx, dy = unit_vector(theta)
        pose = Pose(st.pose.x + cfg.speed * dx, st.pose.y + cfg.speed * dy, theta)

        crashed = collides(pose, self.track, cfg)
        steps = st.steps_taken + 1
        truncated = not crashed and steps >= cfg.max_steps
        reward = cfg.reward_crash if crashed else cfg.reward_alive
        lap_completed = self._update_checkpoints(pose)

        st.pose = pose
        st.steps_taken = steps
        st.score += reward
        st.alive = not crashed
        self._terminal = crashed or truncated

        obs = get_game_state(pose, self.track, cfg)
        return StepResult(obs, reward, self._terminal, steps, st.score,
                          lap_completed, truncated)

    def _update_checkpoints(self, pose: Pose) -> bool:
        """Advance checkpoint progress for the new pose. A hit is the rising
        edge of being inside the expected checkpoint's disc; a lap completes
        when checkpoint 0 is hit after the last checkpoint was passed."""
        cps = self.track.checkpoints
        if not cps:
            return False
        st = self.state
        cp = cps[st.next_checkpoint]
        inside = (pose.x - cp.x) ** 2 + (pose.y - cp.y) ** 2 <= cp.radius ** 2
        lap = False
        if inside and not self._inside_next:
            if cp.index == 0 and self._passed_last:
                st.laps += 1
                lap = True
                self._passed_last = False
            if cp.index == len(cps) - 1:
                self._passed_last = True
            st.next_checkpoint = (cp.index + 1) % len(cps)
            ncp = cps[st.next_checkpoint]
            self._inside_next = ((pose.x - ncp.x) ** 2 + (pose.y - ncp.y) ** 2
                                 <= ncp.radius ** 2)
        else:
            self._inside_next = inside
        return lap
