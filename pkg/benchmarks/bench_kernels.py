#!/usr/bin/env python3
"""Compiled extension vs pure-Python fallback benchmark.

Kernel-level rows time both implementations in-process; the end-to-end
encrypt rows run each backend in a fresh interpreter so the import-time
selection (HECG_PURE_PYTHON) applies to the whole cipher path.

Usage: python benchmarks/bench_kernels.py [--reps 7]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from hecg import _kernels_py

try:
    from hecg import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def best_of(fn, reps):
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_logistic(reps):
    print("logistic_fill (burn_in=100)")
    print(f"{'n':>10} {'pure_ms':>12} {'compiled_ms':>12} {'speedup':>9}")
    for n in (300, 3_000, 100_000, 1_000_000):
        out = np.empty(n)
        pure = best_of(lambda: _kernels_py.logistic_fill(3.99, 0.123, 100, out), reps)
        if _kernels_c is not None:
            comp = best_of(lambda: _kernels_c.logistic_fill(3.99, 0.123, 100, out), reps)
            print(f"{n:>10} {pure * 1e3:>12.4f} {comp * 1e3:>12.4f} {pure / comp:>8.1f}x")
        else:
            print(f"{n:>10} {pure * 1e3:>12.4f} {'-':>12} {'-':>9}")


def bench_keystream(reps):
    print("\nkeystream_apply")
    print(f"{'n':>10} {'pure_ms':>12} {'compiled_ms':>12} {'speedup':>9}")
    rng = np.random.default_rng(0)
    for n in (300, 3_000, 100_000):
        q = rng.integers(0, 256, n).astype(np.uint8)
        perm = rng.permutation(n).astype(np.intp)
        mask = rng.integers(0, 256, n).astype(np.uint8)
        pure = best_of(lambda: _kernels_py.keystream_apply(q, perm, mask), reps)
        if _kernels_c is not None:
            comp = best_of(lambda: _kernels_c.keystream_apply(q, perm, mask), reps)
            print(f"{n:>10} {pure * 1e3:>12.4f} {comp * 1e3:>12.4f} {pure / comp:>8.1f}x")
        else:
            print(f"{n:>10} {pure * 1e3:>12.4f} {'-':>12} {'-':>9}")


END_TO_END = """
import time
import numpy as np
from hecg import backend, cipher, pipeline
seg = next(pipeline.synthetic_ecg(2.0, seed=3))
params = cipher.params_for_segment(seg)
best = float("inf")
for _ in range(300):
    t0 = time.perf_counter()
    cipher.encrypt(seg, params)
    best = min(best, time.perf_counter() - t0)
print(f"{backend.backend_name()} {best * 1e3:.4f}")
"""


def bench_end_to_end():
    print("\nencrypt, 300-sample segment (fresh interpreter per backend)")
    for env_extra in ({}, {"HECG_PURE_PYTHON": "1"}):
        env = {**os.environ, **env_extra}
        out = subprocess.run(
            [sys.executable, "-c", END_TO_END], capture_output=True, text=True, env=env
        )
        if out.returncode != 0:
            print(out.stderr, file=sys.stderr)
            raise SystemExit(1)
        name, ms = out.stdout.split()
        print(f"  {name:>12}: {float(ms):.4f} ms")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--reps", type=int, default=7)
    args = parser.parse_args()
    if _kernels_c is None:
        print("compiled extension not available; pure-Python timings only\n")
    bench_logistic(args.reps)
    bench_keystream(args.reps)
    bench_end_to_end()


if __name__ == "__main__":
    main()
