"""Time the compiled kernels against their pure-Python versions.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--json results.json]

Each kernel runs on the same random inputs under both backends; the table
reports the best wall time of ``--repeat`` runs and the speed-up.
"""
import argparse
import json
import timeit

import numpy as np
from scipy.sparse import random as sparse_random

from conegeo import _fallback

try:
    from conegeo import _kernels
except ImportError:
    _kernels = None


def cases(rng):
    n = 20_000
    polar = np.stack([np.abs(rng.normal(size=n)) + 0.1, rng.uniform(-6, 6, n)], axis=1)
    chart = rng.normal(size=(n, 2))
    f = rng.uniform(0.5, 2.0, n - 1)
    gf = rng.normal(size=(n - 1, 2))
    G = sparse_random(4000, 4000, density=4e-3, random_state=1, format="csr")
    G.data = np.abs(G.data) + 0.1
    ip, ix = G.indptr.astype(np.int64), G.indices.astype(np.int64)
    return {
        "cone_segments": lambda m: m.cone_segments(polar, 0.7, 1e-9),
        "conformal_assemble": lambda m: m.conformal_assemble(chart, f, gf, 0.5),
        "dijkstra_csr": lambda m: m.dijkstra_csr(ip, ix, G.data, 0),
    }


def best_time(fn, repeat):
    fn()  # warm up
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", default=None, help="also write the timings here")
    args = ap.parse_args(argv)
    rng = np.random.default_rng(7)
    rows = []
    for name, call in cases(rng).items():
        py = best_time(lambda: call(_fallback), args.repeat)
        cy = best_time(lambda: call(_kernels), args.repeat) if _kernels else float("nan")
        rows.append({"kernel": name, "python_s": py, "cython_s": cy, "speedup": py / cy})
    print(f"{'kernel':<20} {'python [ms]':>12} {'cython [ms]':>12} {'speed-up':>9}")
    for r in rows:
        print(f"{r['kernel']:<20} {1e3 * r['python_s']:12.3f} {1e3 * r['cython_s']:12.3f} {r['speedup']:9.1f}")
    if _kernels is None:
        print("compiled kernels are not built; only the fallback was timed")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
