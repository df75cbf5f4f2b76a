"""Timing of the compiled and NumPy propagation kernels.

Usage: python3 benchmarks/bench_propagate.py [--cells N] [--points M] [--repeat R]
"""
import argparse
import time

import numpy as np

from miurakdv import _propagate_py, catalog
from miurakdv.hankel import lambda_rule
from miurakdv.weyl import build_cells

try:
    from miurakdv import _propagate
except ImportError:
    _propagate = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--cells", type=int, default=400, help="cell count (smooth_bump mesh)")
    p.add_argument("--points", type=int, default=0, help="spectral points (default: a contour rule)")
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    prof = catalog("smooth_bump", a=2.0, amplitude=0.5)
    cells = build_cells(prof, -4.0, 0.0, mesh=4.0 / args.cells)
    if args.points:
        lam = np.linspace(-5, 5, args.points)
    else:
        lam = lambda_rule(0.0, 0.5, 1.0).nodes
    z = (lam + 1j) ** 2
    y0 = np.column_stack([np.ones_like(z), np.sqrt(-z)])
    print(f"{cells.shape[0]} cells x {z.size} spectral points")

    backends = [("python", _propagate_py)]
    if _propagate is not None:
        backends.insert(0, ("compiled", _propagate))
    ref = None
    for name, mod in backends:
        t = best_of(lambda: mod.propagate_state(cells, z, y0), args.repeat)
        Y = mod.propagate_state(cells, z, y0)
        m = -Y[:, 1] / Y[:, 0]
        gap = "" if ref is None else f"  max |dm| vs compiled {np.max(np.abs(m - ref)):.1e}"
        ref = m if ref is None else ref
        print(f"{name:9s} {t * 1e3:9.2f} ms  {t / (cells.shape[0] * z.size) * 1e9:7.1f} ns/cell/point{gap}")


if __name__ == "__main__":
    main()
