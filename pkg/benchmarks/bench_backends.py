"""Timing comparison of the numba and numpy backends.

Times the three hot kernels (covariance assembly, weighted gradient and
Hessian accumulation) on microbenchmark inputs, then a reduced end-to-end
campaign, under each backend. Reports the median of repeated runs.

Usage: python3 benchmarks/bench_backends.py [--trials 200] [--repeats 5]
"""

from __future__ import annotations

import argparse
import dataclasses
import statistics
import time

import numpy as np

from ratemap import backend
from ratemap.gp import NoiseParams
from ratemap.mc import SimConfig, run_many


def timed(fn, repeats: int) -> float:
    """Median wall time of fn() over `repeats` runs, seconds."""
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return statistics.median(samples)


def micro_inputs(n: int = 400, m: int = 400, seed: int = 0):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.0, 300.0, (n, 2))
    b = rng.uniform(0.0, 300.0, (m, 2))
    w = rng.standard_normal(m)
    return a, b, w


def bench_backend(name: str, trials: int, repeats: int) -> dict[str, float]:
    previous = backend.use(name)
    try:
        impl = backend.active()
        a, b, w = micro_inputs()
        args = (36.0, 72.0, 1e-3)

        # Warm-up triggers numba compilation so it is not timed below.
        impl.cov_matrix(a[:4], b[:4], *args)
        impl.grad_sum(a[:4], b[:4], w[:4], *args)
        impl.hess_sum(a[:4], b[:4], w[:4], *args)

        results = {
            "cov_matrix 400x400":
                timed(lambda: impl.cov_matrix(a, b, *args), repeats),
            "grad_sum 400x400":
                timed(lambda: impl.grad_sum(a, b, w, *args), repeats),
            "hess_sum 400x400":
                timed(lambda: impl.hess_sum(a, b, w, *args), repeats),
        }

        base = SimConfig()
        cfg = dataclasses.replace(
            base, n_trials=trials,
            noise=NoiseParams(sigma_x=10.0, sigma_y=base.noise.sigma_y))
        run_many(dataclasses.replace(cfg, n_trials=2))  # warm-up
        results[f"campaign {trials} trials"] = timed(
            lambda: run_many(cfg), max(1, repeats // 2))
        return results
    finally:
        backend.use(previous)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=200,
                        help="campaign trials per timing run")
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repetitions (median reported)")
    args = parser.parse_args()

    names = ["numpy"] + (["numba"] if backend.HAS_NUMBA else [])
    if not backend.HAS_NUMBA:
        print("numba not importable; timing the numpy backend only")

    table = {name: bench_backend(name, args.trials, args.repeats)
             for name in names}
    rows = list(table[names[0]])
    width = max(len(r) for r in rows)
    header = f"{'benchmark':<{width}}" + "".join(f"{n:>12}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for row in rows:
        line = f"{row:<{width}}"
        for name in names:
            line += f"{table[name][row] * 1e3:>10.2f}ms"
        if len(names) == 2:
            line += f"{table['numpy'][row] / table['numba'][row]:>9.1f}x"
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
