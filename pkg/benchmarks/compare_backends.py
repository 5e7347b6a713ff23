"""Timing comparison of the evaluation kernels: compiled vs pure Python.

Builds two benchmark instances, compresses them, and measures bulk point
location + law evaluation over a batch of random parameters with both
kernel backends.  Run:

    python benchmarks/compare_backends.py [--points 10000] [--seed 0]
"""

import argparse
import time

import numpy as np

from mpqptree import enumeration, evaluator, mpc, tree as treemod
from mpqptree.problem import transform_to_standard


def build(name):
    if name == "p1 n=4 N=2":
        cftoc = mpc.build_problem1(4, 2)
    else:
        cftoc = mpc.build_problem23(2, 2)
    raw, manifest = mpc.condense(cftoc)
    std = transform_to_standard(raw)
    red, _ = enumeration.remove_redundant_constraints(std)
    sol, _ = enumeration.enumerate_regions(red)
    tree = treemod.build_tree(sol, n_u=manifest["n_u"])
    return red, sol, tree


def time_backend(tree, pts, backend, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        nodes, Z = evaluator.locate_eval_batch(tree, pts, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, nodes, Z


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    backends = evaluator.available_backends()
    print(f"available backends: {', '.join(backends)}")
    header = f"{'instance':14s} {'R':>4s} {'points':>7s} " + \
        "".join(f"{b:>12s}" for b in backends) + "   speedup"
    print(header)
    print("-" * len(header))

    rng = np.random.default_rng(args.seed)
    for name, bound in (("p1 n=4 N=2", 10.0), ("p2 nM=2 N=2", 4.0)):
        prob, sol, tree = build(name)
        pts = rng.uniform(-bound, bound, (args.points, prob.np_))
        times = {}
        results = {}
        for backend in backends:
            times[backend], nodes, Z = time_backend(tree, pts, backend)
            results[backend] = (nodes, Z)
        if len(backends) == 2:
            na, Za = results[backends[0]]
            nb, Zb = results[backends[1]]
            assert np.array_equal(na, nb), "backends disagree on located nodes"
            mask = na >= 0
            gap = float(np.max(np.abs(Za[mask] - Zb[mask]))) if mask.any() else 0.0
            assert gap < 1e-10, f"backends disagree on laws ({gap:.2e})"
            speed = times["python"] / times["cython"]
        else:
            speed = float("nan")
        cells = "".join(f"{times[b] * 1e3:10.1f}ms" for b in backends)
        print(f"{name:14s} {sol.R:4d} {args.points:7d} {cells}   {speed:6.1f}x")


if __name__ == "__main__":
    main()
