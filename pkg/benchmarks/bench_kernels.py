"""Compiled kernels versus the numpy/scipy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints the best-of-N wall time per kernel and backend, the speedup, and the
largest disagreement between the two results.
"""

import argparse
import timeit

import numpy as np

from anonlearn import _pykernels

try:
    from anonlearn import _ckernels
except ImportError:  # pragma: no cover
    _ckernels = None


def cases(rng):
    # transport: sizes seen when comparing running averages in FP runs
    for n, m in ((50, 50), (50, 400), (200, 200)):
        a, b = rng.uniform(0.1, 1, n), rng.uniform(0.1, 1, m)
        a, b = a / a.sum(), b / b.sum()
        C = rng.uniform(size=(n, m))
        yield f"transport {n}x{m}", "transport", (a, b, C, -1), lambda r: r[0]
    P, Q = rng.normal(size=(200, 33, 1)), rng.normal(size=(400, 33, 1))
    yield "sup_distance 200x400 paths (N=32)", "sup_distance", (P, Q), lambda r: r
    X, Y = rng.normal(size=(50, 32, 1)), rng.normal(size=(32, 400, 1))
    w = np.full(400, 1 / 400)
    yield "gaussian_field 50 players x 400 atoms", "gaussian_field", (X, Y, w, 0.5, 1.0), lambda r: r[1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; nothing to compare")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':42s} {'cython':>10s} {'python':>10s} {'speedup':>8s} {'max diff':>10s}")
    for label, name, args_, pick in cases(rng):
        fc, fp = getattr(_ckernels, name), getattr(_pykernels, name)
        tc = min(timeit.repeat(lambda: fc(*args_), number=1, repeat=args.repeat))
        tp = min(timeit.repeat(lambda: fp(*args_), number=1, repeat=args.repeat))
        diff = np.max(np.abs(np.asarray(pick(fc(*args_))) - np.asarray(pick(fp(*args_)))))
        print(f"{label:42s} {tc * 1e3:8.2f}ms {tp * 1e3:8.2f}ms {tp / tc:7.1f}x {diff:10.1e}")


if __name__ == "__main__":
    main()
