"""Benchmark the grid kernels across available backends.

Times ray_march_multi (the per-step sensor fan) and any_occupied (the
nine-point collision probe) on the default ring track, for every backend
reported by raydrive.kernels.implementations(). Backend outputs are
checked for exact agreement before any timing is reported.

Usage: python3 benchmarks/bench_kernels.py [--poses 2000] [--repeats 5]
"""

import argparse
import statistics
import time

import numpy as np

from raydrive import kernels
from raydrive.env import EnvConfig, footprint_points
from raydrive.trackmap import Pose, gen_ring_track


def build_workload(n_poses, seed=0):
    """Sensor fans and footprints for random poses inside the ring band."""
    track = gen_ring_track()
    config = EnvConfig()
    rng = np.random.default_rng(seed)
    radius = rng.uniform(27.0, 38.0, size=n_poses)
    bearing = rng.uniform(0.0, 360.0, size=n_poses)
    heading = rng.uniform(-180.0, 180.0, size=n_poses)
    offsets = (np.arange(config.n_sensors) - config.n_sensors // 2) * config.sensor_spacing

    fans = []
    probes = []
    for r, b, h in zip(radius, bearing, heading):
        x = 50.0 + r * np.cos(np.radians(b))
        y = 50.0 + r * np.sin(np.radians(b))
        angles = np.radians(h + offsets)
        fans.append((x, y, np.cos(angles), np.sin(angles)))
        probes.append(footprint_points(Pose(x, y, h), config))
    return track.grid.cells, fans, probes, config


def time_backend(impl, cells, fans, probes, config, repeats):
    """Median seconds per full pass over the workload, plus the outputs."""
    ray_multi = impl["ray_march_multi"]
    occupied = impl["any_occupied"]

    def one_pass():
        hits = np.empty((len(fans), config.n_sensors), dtype=np.int64)
        collided = np.empty(len(probes), dtype=bool)
        for i, (x, y, dxs, dys) in enumerate(fans):
            hits[i] = ray_multi(cells, x, y, dxs, dys, 1.0, config.max_ray)
        for i, (xs, ys) in enumerate(probes):
            collided[i] = occupied(cells, xs, ys)
        return hits, collided

    outputs = one_pass()  # warm-up; also compiles jit kernels
    samples = []
    for _ in range(repeats):
        started = time.perf_counter()
        one_pass()
        samples.append(time.perf_counter() - started)
    return statistics.median(samples), outputs


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--poses", type=int, default=2000,
                        help="poses per pass (default 2000)")
    parser.add_argument("--repeats", type=int, default=5,
                        help="timed passes per backend (default 5)")
    args = parser.parse_args()

    cells, fans, probes, config = build_workload(args.poses)
    impls = kernels.implementations()
    print(f"workload: {args.poses} poses x {config.n_sensors} rays on the "
          f"default ring track; backends: {', '.join(impls)}")

    results = {}
    outputs = {}
    for name, impl in impls.items():
        seconds, out = time_backend(impl, cells, fans, probes, config,
                                    args.repeats)
        results[name] = seconds
        outputs[name] = out

    names = list(outputs)
    reference = outputs[names[0]]
    for name in names[1:]:
        hits_equal = np.array_equal(reference[0], outputs[name][0])
        collide_equal = np.array_equal(reference[1], outputs[name][1])
        if not (hits_equal and collide_equal):
            raise SystemExit(f"backend outputs disagree: {names[0]} vs {name}")
    print("outputs identical across backends: yes")

    per_call = {name: s / args.poses * 1e6 for name, s in results.items()}
    for name in sorted(results):
        print(f"{name:>6}: {results[name] * 1e3:8.2f} ms/pass  "
              f"{per_call[name]:8.2f} us/pose")
    if "numba" in results and "numpy" in results:
        print(f"speedup (numpy/numba): {results['numpy'] / results['numba']:.1f}x")


if __name__ == "__main__":
    main()
