"""Track world model: occupancy grid, TRK1 text format, generators, ray casts.

Coordinates: x grows right, y grows down, angles in degrees with 0 pointing
along +x and positive rotation toward +y. One world unit spans one grid cell,
so point (x, y) lands in cell (floor(x), floor(y)). Everything off-grid is
treated as occupied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels


class TrackError(ValueError):
    """Base class for track parsing and construction failures."""


class MissingHeaderField(TrackError):
    """A required TRK1 header line is absent or malformed."""


class DimensionMismatch(TrackError):
    """Grid rows do not match the declared size."""


class InvalidCell(TrackError):
    """Grid row contains a character other than '.' or '#'."""


class SpawnOccupied(TrackError):
    """Spawn point lands in an occupied cell."""


class CheckpointOccupied(TrackError):
    """Checkpoint center lands in an occupied cell."""


class BadNumber(TrackError):
    """A numeric field failed to parse or is non-finite."""


class InvalidRadii(TrackError):
    """Ring generator radii are inconsistent with the grid size."""


class InvalidDimensions(TrackError):
    """Corridor generator dimensions are too small."""


def unit_vector(angle_deg: float) -> tuple[float, float]:
    """(cos, sin) of the angle; the y component points down-screen."""
    rad = math.radians(angle_deg)
    return math.cos(rad), math.sin(rad)


@dataclass(frozen=True)
class Pose:
    """Car position and heading. theta is unbounded; normalize only for display."""

    x: float
    y: float
    theta: float

    def normalized_theta(self) -> float:
        return self.theta % 360.0


@dataclass(frozen=True)
class Checkpoint:
    """Progress disc: crossing within radius of (x, y) counts as a hit."""

    x: float
    y: float
    radius: float
    index: int


class OccupancyGrid:
    """Immutable binary raster. True cells block; off-grid blocks too."""

    __slots__ = ("width", "height", "cells")

    def __init__(self, cells):
        arr = np.ascontiguousarray(cells, dtype=np.bool_)
        if arr.ndim != 2 or arr.size == 0:
            raise DimensionMismatch("grid must be a non-empty 2d array of cells")
        arr.flags.writeable = False
        self.cells = arr
        self.height, self.width = arr.shape

    def is_occupied(self, x: float, y: float) -> bool:
        if x < 0.0 or y < 0.0 or x >= self.width or y >= self.height:
            return True
        return bool(self.cells[int(y), int(x)])

    def __eq__(self, other):
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return np.array_equal(self.cells, other.cells)

    def __repr__(self):
        return f"OccupancyGrid({self.width}x{self.height}, {int(self.cells.sum())} blocked)"


@dataclass(frozen=True)
class TrackSpec:
    """A complete drivable world. name is display metadata, excluded from equality."""

    name: str = field(compare=False)
    grid: OccupancyGrid
    spawn: Pose
    checkpoints: tuple[Checkpoint, ...] = ()


def is_occupied(grid: OccupancyGrid, x: float, y: float) -> bool:
    """Module-level alias of OccupancyGrid.is_occupied."""
    return grid.is_occupied(x, y)


def ray_cast(grid: OccupancyGrid, origin, angle_deg: float, max_len: int = 1000,
             step: float = 1.0) -> int:
    """Unit-march distance from origin to the first blocked cell.

    Checks integer multiples of step only; returns 0 if the origin is blocked
    and max_len if nothing is hit within max_len steps.
    """
    ox, oy = float(origin[0]), float(origin[1])
    dx, dy = unit_vector(angle_deg)
    return int(kernels.ray_march(grid.cells, ox, oy, dx, dy, float(step), int(max_len)))


def _parse_int(token: str, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise BadNumber(f"{what}: not an integer: {token!r}") from None


def _parse_float(token: str, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise BadNumber(f"{what}: not a number: {token!r}") from None
    if not math.isfinite(value):
        raise BadNumber(f"{what}: must be finite, got {token!r}")
    return value


def _validate_placements(spec: TrackSpec) -> TrackSpec:
    if spec.grid.is_occupied(spec.spawn.x, spec.spawn.y):
        raise SpawnOccupied(
            f"spawn ({spec.spawn.x}, {spec.spawn.y}) lands in an occupied cell")
    for cp in spec.checkpoints:
        if spec.grid.is_occupied(cp.x, cp.y):
            raise CheckpointOccupied(
                f"checkpoint {cp.index} center ({cp.x}, {cp.y}) lands in an occupied cell")
    return spec


def parse_trk(text: str) -> TrackSpec:
    """Parse TRK1 text. Tolerates a missing trailing newline, nothing else."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].split() != ["TRK1"]:
        raise MissingHeaderField("first line must be 'TRK1'")

    i = 1
    if i >= len(lines) or lines[i].split()[:1] != ["size"]:
        raise MissingHeaderField("expected 'size <width> <height>' on line 2")
    parts = lines[i].split()
    if len(parts) != 3:
        raise MissingHeaderField("'size' line needs exactly width and height")
    width = _parse_int(parts[1], "size width")
    height = _parse_int(parts[2], "size height")
    if width < 1 or height < 1:
        raise DimensionMismatch(f"size must be >= 1x1, got {width}x{height}")

    i += 1
    if i >= len(lines) or lines[i].split()[:1] != ["spawn"]:
        raise MissingHeaderField("expected 'spawn <x> <y> <theta>' on line 3")
    parts = lines[i].split()
    if len(parts) != 4:
        raise MissingHeaderField("'spawn' line needs exactly x, y and theta")
    spawn = Pose(_parse_float(parts[1], "spawn x"),
                 _parse_float(parts[2], "spawn y"),
                 _parse_float(parts[3], "spawn theta"))

    i += 1
    checkpoints = []
    while i < len(lines) and lines[i].split()[:1] == ["checkpoint"]:
        parts = lines[i].split()
        if len(parts) != 4:
            raise MissingHeaderField("'checkpoint' line needs exactly x, y and radius")
        radius = _parse_float(parts[3], "checkpoint radius")
        if radius <= 0:
            raise BadNumber(f"checkpoint radius must be > 0, got {radius}")
        checkpoints.append(Checkpoint(_parse_float(parts[1], "checkpoint x"),
                                      _parse_float(parts[2], "checkpoint y"),
                                      radius, len(checkpoints)))
        i += 1

    if i >= len(lines) or lines[i].split() != ["grid"]:
        raise MissingHeaderField("expected 'grid' line after the header")
    i += 1

    rows = lines[i:]
    if len(rows) != height:
        raise DimensionMismatch(f"expected {height} grid rows, got {len(rows)}")
    cells = np.empty((height, width), dtype=np.bool_)
    for r, row in enumerate(rows):
        if len(row) != width:
            raise DimensionMismatch(
                f"grid row {r} has {len(row)} cells, expected {width}")
        bad = set(row) - {".", "#"}
        if bad:
            raise InvalidCell(f"grid row {r} contains invalid cell {bad.pop()!r}")
        cells[r] = [c == "#" for c in row]

    spec = TrackSpec(name=f"track-{width}x{height}", grid=OccupancyGrid(cells),
                     spawn=spawn, checkpoints=tuple(checkpoints))
    return _validate_placements(spec)


def _fmt(value: float) -> str:
    return repr(float(value))


def serialize_trk(spec: TrackSpec) -> str:
    """Canonical TRK1 text: LF newlines, shortest round-trip float repr."""
    out = [
        "TRK1",
        f"size {spec.grid.width} {spec.grid.height}",
        f"spawn {_fmt(spec.spawn.x)} {_fmt(spec.spawn.y)} {_fmt(spec.spawn.theta)}",
    ]
    for cp in spec.checkpoints:
        out.append(f"checkpoint {_fmt(cp.x)} {_fmt(cp.y)} {_fmt(cp.radius)}")
    out.append("grid")
    for r in range(spec.grid.height):
        row = spec.grid.cells[r]
        out.append("".join("#" if v else "." for v in row))
    return "\n".join(out) + "\n"


def gen_ring_track(width: int = 100, height: int = 100, outer_radius: float = 40.0,
                   inner_radius: float = 25.0, n_checkpoints: int = 4) -> TrackSpec:
    """Annulus centered on the grid; drivable where the cell center distance
    from the grid center lies in [inner_radius, outer_radius].

    Spawn sits mid-annulus to the right of center, heading +y (clockwise on
    screen). Checkpoints sit mid-annulus at evenly spaced angles starting at
    the spawn, radius half the annulus width, ordered along the travel
    direction.
    """
    if not (0 < inner_radius < outer_radius <= min(width, height) / 2):
        raise InvalidRadii(
            "need 0 < inner_radius < outer_radius <= min(width, height)/2, "
            f"got inner={inner_radius} outer={outer_radius} for {width}x{height}")
    if n_checkpoints < 0:
        raise ValueError(f"n_checkpoints must be >= 0, got {n_checkpoints}")

    cx, cy = width / 2.0, height / 2.0
    xs = np.arange(width, dtype=np.float64) + 0.5
    ys = np.arange(height, dtype=np.float64) + 0.5
    dist = np.hypot(xs[None, :] - cx, ys[:, None] - cy)
    drivable = (dist >= inner_radius) & (dist <= outer_radius)
    grid = OccupancyGrid(~drivable)

    mid = (inner_radius + outer_radius) / 2.0
    spawn = Pose(cx + mid, cy, 90.0)
    cp_radius = (outer_radius - inner_radius) / 2.0
    checkpoints = []
    for k in range(n_checkpoints):
        ux, uy = unit_vector(k * (360.0 / n_checkpoints))
        checkpoints.append(Checkpoint(cx + mid * ux, cy + mid * uy, cp_radius, k))

    spec = TrackSpec(name=f"ring-{width}x{height}-o{outer_radius:g}-i{inner_radius:g}",
                     grid=grid, spawn=spawn, checkpoints=tuple(checkpoints))
    try:
        return _validate_placements(spec)
    except (SpawnOccupied, CheckpointOccupied) as exc:
        raise InvalidRadii(f"annulus too thin for the grid resolution: {exc}") from None


def gen_corridor_track(length: int, corridor_width: int) -> TrackSpec:
    """Straight open corridor ringed by a one-cell wall, spawn at the left end
    heading +x, no checkpoints."""
    if length < 3 or corridor_width < 1:
        raise InvalidDimensions(
            f"need length >= 3 and corridor_width >= 1, got {length}x{corridor_width}")
    cells = np.ones((corridor_width + 2, length + 2), dtype=np.bool_)
    cells[1:-1, 1:-1] = False
    spawn = Pose(1.5, (corridor_width + 2) / 2.0, 0.0)
    return TrackSpec(name=f"corridor-{length}x{corridor_width}",
                     grid=OccupancyGrid(cells), spawn=spawn, checkpoints=())
