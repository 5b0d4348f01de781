"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from rdb_regions import kernels
from rdb_regions.regions import hamming
from rdb_regions.search import kernel_grid_array, simplex_grid_array


def cases():
    rng = np.random.default_rng(0)
    pst = rng.dirichlet(np.ones(4)).reshape(2, 2)
    py = np.array([[0.9, 0.1], [0.1, 0.9]])
    pz = np.array([[0.8, 0.2], [0.2, 0.8]])
    d = hamming(2)
    gu = kernel_grid_array(2, 4, 3)
    gv = kernel_grid_array(2, 2, 3)
    gw = simplex_grid_array(3, 4)
    gx = kernel_grid_array(3, 2, 4)
    ks = rng.dirichlet(np.ones(4), size=8)
    width = 2 * 4 + 2 * 2 + 2 * 2 + 3 + 3 * 2
    params = np.concatenate([rng.dirichlet(np.ones(n), size=r).ravel()
                             for r, n in ((2, 4), (2, 2), (2, 2), (1, 3), (3, 2))])
    params = np.tile(params, (200, 1))
    assert params.shape[1] == width
    return {
        "inner_source_stats": lambda b: b.inner_source_stats(pst, gu[5], gv[3], gv[7], d, d, 2, 2),
        "inner_source_scan": lambda b: b.inner_source_scan(pst, gu[:40], gv, gv, d, d, 2, 2),
        "bc_scan": lambda b: b.bc_scan(gw, gx, py, pz),
        "outer_stats": lambda b: b.outer_stats(pst, gv[3], gv[5], gv[7], ks, d, d),
        "inner_full_slacks": lambda b: b.inner_full_slacks(pst, py, pz, d, d, 2, 2, 2, 2, 3, params,
                                                           0.5, 0.2, 0.1, 1.0),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if kernels.compiled_backend is None:
        raise SystemExit("compiled extension not built; run pip install -e . --no-build-isolation")
    print(f"{'kernel':<20} {'compiled ms':>12} {'python ms':>12} {'speedup':>9}")
    for name, fn in cases().items():
        t = {}
        for label, be in (("c", kernels.compiled_backend), ("p", kernels.python_backend)):
            fn(be)
            n = 1 if label == "p" else 5
            t[label] = min(timeit.repeat(lambda: fn(be), number=n, repeat=args.repeat)) / n * 1e3
        print(f"{name:<20} {t['c']:>12.3f} {t['p']:>12.3f} {t['p'] / t['c']:>8.1f}x")


if __name__ == "__main__":
    main()
