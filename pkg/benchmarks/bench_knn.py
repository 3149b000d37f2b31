"""Compiled kernels versus the pure numpy fallback.

Times k-th neighbor queries (all points, k=4, max-norm) for each backend and
index structure across dimensions, plus the Kerr phase kernel used by the
split-step solver. The kd-tree / brute-force crossover in dimension is what
sets ``fibermi.index.KD_MAX_DIM``.

    python benchmarks/bench_knn.py            # default sizes
    python benchmarks/bench_knn.py --quick    # a few seconds
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from fibermi import _fallback, index
from fibermi.numerics import SampleSet


def best_of(fn, repeat):
    t = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        t.append(time.perf_counter() - t0)
    return min(t)


def bench_knn(n, dims, k, repeat, numpy_limit):
    rng = np.random.default_rng(0)
    print(f"k-th neighbor distance, all {n} points, k={k}, max-norm (seconds, best of {repeat})")
    print(f"{'d':>4} {'compiled kd-tree':>17} {'compiled brute':>15} {'numpy brute':>12}  same")
    for d in dims:
        pts = SampleSet(rng.standard_normal((n, d)))
        res, cells = [], []
        for structure, backend in (("kd-tree", "compiled"), ("brute-force-blocked", "compiled"),
                                   ("brute-force-blocked", "numpy")):
            if backend == "compiled" and index.BACKEND != "compiled":
                cells.append(f"{'n/a':>{17 if structure == 'kd-tree' else 15}}")
                continue
            if backend == "numpy" and n > numpy_limit:
                cells.append(f"{'skipped':>12}")
                continue
            idx = index.NeighborIndex(pts, structure=structure, backend=backend)
            out = {}
            t = best_of(lambda: out.setdefault("d", idx.kth_distances(k)), repeat)
            res.append(out["d"])
            width = 17 if structure == "kd-tree" else (15 if backend == "compiled" else 12)
            cells.append(f"{t:>{width}.3f}")
        same = all(np.array_equal(res[0], r) for r in res[1:])
        print(f"{d:>4} {' '.join(cells)}  {'yes' if same else 'NO'}")


def bench_kerr(n, repeat):
    rng = np.random.default_rng(1)
    u0 = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * 1e-2
    print(f"\nKerr phase u *= exp(j c |u|^2), {n} samples (ms, best of {repeat})")
    rows = [("numpy", _fallback.kerr_phase)]
    if index._kernels is not None:
        rows.insert(0, ("compiled", index._kernels.kerr_phase))
    for name, fn in rows:
        u = u0.copy()
        t = best_of(lambda: fn(u, 0.1), repeat)
        print(f"{name:>10} {1e3 * t:8.3f}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2**14)
    ap.add_argument("--k", type=int, default=4)
    ap.add_argument("--dims", type=int, nargs="+", default=[1, 2, 4, 6, 8, 10, 12, 16, 44])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--numpy-limit", type=int, default=2**14, help="skip the numpy scan above this N")
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args(argv)
    if args.quick:
        args.n, args.repeat, args.dims = 4096, 1, [2, 8, 16, 44]
    print(f"backend selected at import: {index.BACKEND}\n")
    bench_knn(args.n, args.dims, args.k, args.repeat, args.numpy_limit)
    bench_kerr(32768, max(args.repeat, 5))


if __name__ == "__main__":
    main()
