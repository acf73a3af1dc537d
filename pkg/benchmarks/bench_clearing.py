#!/usr/bin/env python3
"""Benchmark the order-matching kernel: compiled extension vs pure Python.

Generates seeded random books at several sizes, verifies both backends agree
bit-for-bit, then times them.

Usage: python benchmarks/bench_clearing.py [--repeats 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from lemsim._kernels.matching_py import match_orders as match_py

try:
    from lemsim._kernels._matching import match_orders as match_cy
except ImportError:
    match_cy = None


def make_books(rng, n_books, n_orders, n_agents=8):
    books = []
    for _ in range(n_books):
        nb = n_orders // 2
        ns = n_orders - nb
        bp = np.sort(rng.uniform(20.0, 600.0, nb))[::-1].copy()
        sp = np.sort(rng.uniform(20.0, 600.0, ns))
        books.append((
            bp, rng.uniform(0.5, 180.0, nb),
            rng.integers(0, n_agents, nb).astype(np.int64),
            sp, rng.uniform(0.5, 180.0, ns),
            rng.integers(0, n_agents, ns).astype(np.int64),
        ))
    return books


def time_backend(fn, books, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for book in books:
            fn(*book)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--books", type=int, default=2000)
    args = parser.parse_args()

    if match_cy is None:
        print("compiled kernel not available; benchmarking pure Python only")

    rng = np.random.Generator(np.random.PCG64(0))
    print(f"{'orders/book':>12} {'python (ms)':>12} {'cython (ms)':>12} "
          f"{'speedup':>8}")
    for n_orders in (8, 16, 64, 256):
        books = make_books(rng, args.books, n_orders)
        if match_cy is not None:
            for book in books[:50]:
                out_py, out_cy = match_py(*book), match_cy(*book)
                assert all(np.array_equal(a, b)
                           for a, b in zip(out_py, out_cy)), "backends diverge"
        t_py = time_backend(match_py, books, args.repeats) * 1e3
        if match_cy is not None:
            t_cy = time_backend(match_cy, books, args.repeats) * 1e3
            print(f"{n_orders:>12} {t_py:>12.2f} {t_cy:>12.2f} "
                  f"{t_py / t_cy:>7.1f}x")
        else:
            print(f"{n_orders:>12} {t_py:>12.2f} {'-':>12} {'-':>8}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
