"""Hot numeric kernels: grid ray marching and footprint occupancy checks.

Two interchangeable backends produce bit-identical results:

* ``numba`` -- @njit compiled loops, the default when numba imports.
* ``numpy`` -- chunked vectorized fallback, no compilation step.

Select one explicitly with ``RAYDRIVE_BACKEND=numba|numpy`` (read once at
import); anything else auto-detects. Callers pass in precomputed ray
direction components, so the trigonometry is shared and switching backends
never changes simulation output.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    njit = None
    NUMBA_AVAILABLE = False

_CHUNK = 128  # march block size for the vectorized fallback


def _ray_march_numpy(cells, ox, oy, dx, dy, step, max_len):
    """Distance (in steps) from (ox, oy) along (dx, dy) to the first blocked cell.

    Returns 0 when the origin itself is blocked, max_len when nothing is hit.
    Off-grid counts as blocked.
    """
    h, w = cells.shape
    if ox < 0.0 or oy < 0.0 or ox >= w or oy >= h or cells[int(oy), int(ox)]:
        return 0
    for lo in range(1, max_len + 1, _CHUNK):
        hi = min(lo + _CHUNK, max_len + 1)
        ts = np.arange(lo, hi, dtype=np.float64) * step
        xs = ox + ts * dx
        ys = oy + ts * dy
        oob = (xs < 0.0) | (ys < 0.0) | (xs >= w) | (ys >= h)
        cx = np.clip(xs, 0.0, w - 1).astype(np.int64)
        cy = np.clip(ys, 0.0, h - 1).astype(np.int64)
        hit = oob | cells[cy, cx]
        j = int(np.argmax(hit))
        if hit[j]:
            return lo + j
    return max_len


def _ray_march_multi_numpy(cells, ox, oy, dxs, dys, step, max_len):
    out = np.empty(dxs.shape[0], dtype=np.int64)
    for i in range(dxs.shape[0]):
        out[i] = _ray_march_numpy(cells, ox, oy, float(dxs[i]), float(dys[i]), step, max_len)
    return out


def _any_occupied_numpy(cells, xs, ys):
    """True if any point (xs[i], ys[i]) lands in a blocked or off-grid cell."""
    h, w = cells.shape
    oob = (xs < 0.0) | (ys < 0.0) | (xs >= w) | (ys >= h)
    if bool(oob.any()):
        return True
    return bool(cells[ys.astype(np.int64), xs.astype(np.int64)].any())


if NUMBA_AVAILABLE:

    @njit(cache=True)
    def _ray_march_numba(cells, ox, oy, dx, dy, step, max_len):
        h, w = cells.shape
        if ox < 0.0 or oy < 0.0 or ox >= w or oy >= h or cells[int(oy), int(ox)]:
            return 0
        for t in range(1, max_len + 1):
            ts = t * step
            x = ox + ts * dx
            y = oy + ts * dy
            if x < 0.0 or y < 0.0 or x >= w or y >= h:
                return t
            if cells[int(y), int(x)]:
                return t
        return max_len

    @njit(cache=True)
    def _ray_march_multi_numba(cells, ox, oy, dxs, dys, step, max_len):
        out = np.empty(dxs.shape[0], dtype=np.int64)
        for i in range(dxs.shape[0]):
            out[i] = _ray_march_numba(cells, ox, oy, dxs[i], dys[i], step, max_len)
        return out

    @njit(cache=True)
    def _any_occupied_numba(cells, xs, ys):
        h, w = cells.shape
        for i in range(xs.shape[0]):
            x = xs[i]
            y = ys[i]
            if x < 0.0 or y < 0.0 or x >= w or y >= h:
                return True
            if cells[int(y), int(x)]:
                return True
        return False


def implementations():
    """Available backends, name -> {kernel name -> callable}. Used by tests/benchmarks."""
    impls = {
        "numpy": {
            "ray_march": _ray_march_numpy,
            "ray_march_multi": _ray_march_multi_numpy,
            "any_occupied": _any_occupied_numpy,
        }
    }
    if NUMBA_AVAILABLE:
        impls["numba"] = {
            "ray_march": _ray_march_numba,
            "ray_march_multi": _ray_march_multi_numba,
            "any_occupied": _any_occupied_numba,
        }
    return impls


def _pick_backend() -> str:
    choice = os.environ.get("RAYDRIVE_BACKEND", "auto").strip().lower()
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        if not NUMBA_AVAILABLE:
            raise ImportError("RAYDRIVE_BACKEND=numba but numba is not importable")
        return "numba"
    return "numba" if NUMBA_AVAILABLE else "numpy"


BACKEND = _pick_backend()

_active = implementations()[BACKEND]
ray_march = _active["ray_march"]
ray_march_multi = _active["ray_march_multi"]
any_occupied = _active["any_occupied"]


def active_backend() -> str:
    """Name of the backend selected at import time."""
    return BACKEND
