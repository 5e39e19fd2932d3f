"""Compiled vs pure-Python kernels.

Times each kernel on fixed random inputs with both backends, then the full
generic projected ascent (which calls Dykstra every step) with the package
routed through each backend in turn. Prints a table of best-of-repeat times.

    python benchmarks/bench_kernels.py --repeat 5 --n 200
"""
import argparse
import json
import sys
import timeit
from unittest import mock

import numpy as np

from onebitcs import kernels
from onebitcs.solve import SparseBall, generic_argmax, sparse_argmax

KERNELS = ("project_l1_ball", "project_l2_ball", "project_ellipsoid", "dykstra_l1_l2",
           "dykstra_l1_ellipsoid", "soft_threshold_level", "hamming", "pair_disagreements")


def cases(n, gen):
    v = 3.0 * gen.standard_normal(n)
    a = np.sort(np.abs(gen.standard_normal(n)))[::-1].copy()
    evals = np.where(np.arange(n) < n // 2, 4.0, 1.0)
    evecs = np.eye(1)
    signs = (gen.standard_normal((4096, 64)) >= 0).astype(np.uint8)
    left = np.arange(32, dtype=np.intp)
    right = left + 32
    y1, y2 = signs[:, 0].astype(np.int8), signs[:, 1].astype(np.int8)
    s = max(2.5, n / 20)
    return {
        "project_l1_ball": lambda k: k.project_l1_ball(v, np.sqrt(s)),
        "dykstra_l1_l2": lambda k: k.dykstra_l1_l2(v, np.sqrt(s), 1.0, 1e-9, 10000),
        "dykstra_l1_ellipsoid": lambda k: k.dykstra_l1_ellipsoid(v, np.sqrt(s), evals, evecs, True,
                                                                 1e-9, 10000, 1e-12, 200),
        "soft_threshold_level": lambda k: k.soft_threshold_level(a, np.sqrt(s), 1e-12),
        "pair_disagreements": lambda k: k.pair_disagreements(signs, left, right,
                                                             np.zeros(left.size, dtype=np.int64)),
        "hamming": lambda k: k.hamming(y1, y2),
    }, s


def best_time(fn, repeat):
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=number)) / number


def routed(module):
    return mock.patch.multiple(kernels, **{name: getattr(module, name) for name in KERNELS})


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200, help="vector dimension")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", action="store_true", help="print machine-readable results")
    args = ap.parse_args(argv)

    backends = kernels.backends()
    if "cython" not in backends:
        print("compiled extension not built; only the Python backend is available", file=sys.stderr)
    gen = np.random.default_rng(args.seed)
    table, s = cases(args.n, gen)
    c = gen.standard_normal(args.n)

    results = {}
    for name, fn in table.items():
        results[name] = {b: best_time(lambda: fn(mod), args.repeat) for b, mod in backends.items()}
    for label, fn in (("sparse_argmax", lambda: sparse_argmax(c, s)),
                      ("generic_argmax", lambda: generic_argmax(c, SparseBall(s).projection()))):
        results[label] = {}
        for b, mod in backends.items():
            with routed(mod):
                results[label][b] = best_time(fn, max(1, args.repeat // 2))

    if args.json:
        print(json.dumps({"n": args.n, "seconds": results}, indent=1, sort_keys=True))
        return 0
    names = sorted(backends)
    print(f"n = {args.n}, best of {args.repeat}")
    print(f"{'kernel':<22}" + "".join(f"{b:>14}" for b in names) + f"{'speedup':>10}")
    for name, row in results.items():
        cells = "".join(f"{row[b] * 1e6:>12.1f}us" for b in names)
        ratio = f"{row['python'] / row['cython']:>9.1f}x" if "cython" in row else ""
        print(f"{name:<22}{cells}{ratio}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
