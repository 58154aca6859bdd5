"""Compare the compiled and NumPy raycast kernels on a LiDAR-sized and an MCL-sized batch.

    python benchmarks/bench_raycast.py [--track oval] [--repeat 20]
"""

import argparse
import time

import numpy as np

from racelab._kernels import dda_py
from racelab.scenario import load_scenario

try:
    from racelab._kernels import _dda
except ImportError:
    _dda = None


def batch(grid, n, rng):
    free = np.argwhere(grid.cells == 0)
    pick = free[rng.integers(len(free), size=n)]
    xs = grid.origin[0] + (pick[:, 1] + 0.5) * grid.resolution
    ys = grid.origin[1] + (pick[:, 0] + 0.5) * grid.resolution
    return xs, ys, rng.uniform(-np.pi, np.pi, n)


def timeit(fn, args, repeat):
    fn(*args)
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--track", default="oval")
    ap.add_argument("--repeat", type=int, default=20)
    a = ap.parse_args()
    g = load_scenario(a.track).grid
    occ = np.ascontiguousarray(g.cells, dtype=np.uint8)
    rng = np.random.default_rng(0)
    print(f"{'rays':>8} {'numpy (ms)':>12} {'cython (ms)':>12} {'speedup':>8}")
    for n in (1080, 60_000):
        xs, ys, ang = batch(g, n, rng)
        args = (occ, g.resolution, g.origin[0], g.origin[1], xs, ys, ang, 30.0)
        tp = timeit(dda_py.cast_rays, args, a.repeat)
        if _dda is None:
            print(f"{n:8d} {tp * 1e3:12.2f} {'n/a':>12} {'':>8}")
            continue
        tc = timeit(_dda.cast_rays, args, a.repeat)
        assert np.allclose(_dda.cast_rays(*args), dda_py.cast_rays(*args), atol=1e-12)
        print(f"{n:8d} {tp * 1e3:12.2f} {tc * 1e3:12.2f} {tp / tc:7.1f}x")


if __name__ == "__main__":
    main()
