#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Times the four hot per-sample kernels on synthetic score matrices and
checks that both backends return identical bits. Run after installing
with the extension built:

    python benchmarks/bench_kernels.py [--n 1000000] [--k 7] [--repeat 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from scoresets._kernels import _pure

try:
    from scoresets._kernels import _setops
except ImportError:
    _setops = None


def _timeit(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=1_000_000, help="samples")
    parser.add_argument("--k", type=int, default=7, help="classes")
    parser.add_argument("--repeat", type=int, default=5, help="timing repetitions")
    args = parser.parse_args()

    if _setops is None:
        print("compiled extension not built; nothing to compare")
        return 1

    rng = np.random.default_rng(7)
    probs = rng.dirichlet(np.full(args.k, 0.5), size=args.n)
    labels = rng.integers(0, args.k, size=args.n).astype(np.int64)
    q_hat = 0.8

    cases = {
        "conformity": (
            lambda: _pure.conformity(probs, labels),
            lambda: _setops.conformity(probs, labels),
        ),
        "count_covered": (
            lambda: _pure.count_covered(probs, labels, q_hat),
            lambda: _setops.count_covered(probs, labels, q_hat),
        ),
        "build_sets": (
            lambda: _pure.build_sets(probs, q_hat, True),
            lambda: _setops.build_sets(probs, q_hat, True),
        ),
    }
    indices, offsets = _pure.build_sets(probs, q_hat, True)
    cases["set_membership"] = (
        lambda: _pure.set_membership(indices, offsets, labels),
        lambda: _setops.set_membership(indices, offsets, labels),
    )

    print(f"n={args.n} k={args.k} q_hat={q_hat} (best of {args.repeat})")
    print(f"{'kernel':<16} {'numpy':>10} {'cython':>10} {'speedup':>8}")
    for name, (py_fn, cy_fn) in cases.items():
        py_out, cy_out = py_fn(), cy_fn()
        if isinstance(py_out, tuple):
            same = all(np.array_equal(a, b) for a, b in zip(py_out, cy_out))
        else:
            same = np.array_equal(py_out, cy_out)
        if not same:
            print(f"{name}: BACKEND MISMATCH")
            return 1
        t_py = _timeit(py_fn, args.repeat)
        t_cy = _timeit(cy_fn, args.repeat)
        print(f"{name:<16} {t_py * 1e3:>8.2f}ms {t_cy * 1e3:>8.2f}ms {t_py / t_cy:>7.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
