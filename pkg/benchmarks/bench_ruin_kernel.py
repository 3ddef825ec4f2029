#!/usr/bin/env python3
"""Throughput comparison of the surplus-path kernel backends.

Runs the same workload through the numba kernel and the vectorized numpy
fallback and prints paths/second for each. The numba timing excludes JIT
compilation (one warmup call).

Usage: python benchmarks/bench_ruin_kernel.py [--paths N] [--horizon H] [--repeat R]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from mecsim import _kernels


def time_backend(backend: str, n_paths: int, horizon: float, per_slot: bool, repeat: int) -> tuple[float, float]:
    args = dict(
        n_paths=n_paths,
        seed=42,
        initial=8.0,
        premium=1.2,
        lam=1.0,
        claim_mean=0.9,
        horizon=horizon,
        per_slot=per_slot,
        backend=backend,
    )
    _kernels.simulate_surplus_paths(**{**args, "n_paths": min(n_paths, 100)})  # warmup / JIT
    best = float("inf")
    ruin = 0.0
    for _ in range(repeat):
        t0 = time.perf_counter()
        mins, _ = _kernels.simulate_surplus_paths(**args)
        best = min(best, time.perf_counter() - t0)
        ruin = float(np.mean(mins < 2.0))
    return best, ruin


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--paths", type=int, default=200_000)
    parser.add_argument("--horizon", type=float, default=50.0)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    backends = ["numpy"]
    if _kernels.NUMBA_ENABLED:
        backends.insert(0, "numba")
    else:
        print("numba disabled (MECSIM_NO_NUMBA set or import failed); numpy only")

    for per_slot in (False, True):
        schedule = "per_slot" if per_slot else "poisson"
        print(f"\nschedule={schedule} paths={args.paths} horizon={args.horizon}")
        print(f"{'backend':>8} {'seconds':>10} {'paths/s':>12} {'ruin frac':>10}")
        base = None
        for backend in backends:
            seconds, ruin = time_backend(backend, args.paths, args.horizon, per_slot, args.repeat)
            rate = args.paths / seconds
            note = ""
            if base is not None:
                ratio = seconds / base
                note = f"  ({ratio:.2f}x {backends[0]} time)"
            else:
                base = seconds
            print(f"{backend:>8} {seconds:>10.4f} {rate:>12.0f} {ruin:>10.4f}{note}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
