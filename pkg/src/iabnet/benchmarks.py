"""Benchmark the compiled kernel backend against the numpy fallback.

Run with ``python -m iabnet.benchmarks``. Times the hard-core thinning
kernel in isolation (the hot inner loop of the Monte Carlo engine) and an
end-to-end coverage estimate with each backend, and verifies that both
backends produce identical masks.
"""
import math
import time

import numpy as np

from . import kernels, montecarlo
from .config import default_params


def _thinning_case(n_segments, parent_density, radius, xi, seed):
    rng = np.random.default_rng(seed)
    counts = rng.poisson(parent_density * math.pi * radius**2, n_segments)
    total = int(counts.sum())
    r = radius * np.sqrt(rng.random(total))
    th = 2 * math.pi * rng.random(total)
    starts = np.zeros(n_segments + 1, dtype=np.int64)
    np.cumsum(counts, out=starts[1:])
    return r * np.cos(th), r * np.sin(th), rng.random(total), starts


def _time(fn, repeat=5):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_thinning():
    print("== hard-core thinning (batch of Monte Carlo sized segments) ==")
    x, y, m, starts = _thinning_case(4096, 1.2e-5, 1100.0, 100.0, seed=0)
    print(f"   {x.shape[0]} points in {starts.shape[0] - 1} segments")
    results = {}
    for name in kernels.available_backends():
        kernels.use_backend(name)
        dt, out = _time(lambda: kernels.thin_hardcore(x, y, m, starts, 100.0))
        results[name] = out
        print(f"   {name:>7}: {dt * 1e3:8.2f} ms  ({x.shape[0] / dt / 1e6:.2f} Mpts/s)")
    vals = list(results.values())
    assert all(np.array_equal(vals[0], v) for v in vals[1:]), "backends disagree"
    print("   masks identical across backends")

    print("== hard-core thinning (one large dense pattern) ==")
    x, y, m, starts = _thinning_case(1, 2e-3, 2000.0, 20.0, seed=1)
    print(f"   {x.shape[0]} points")
    for name in kernels.available_backends():
        kernels.use_backend(name)
        dt, _ = _time(lambda: kernels.thin_hardcore(x, y, m, starts, 20.0), repeat=3)
        print(f"   {name:>7}: {dt * 1e3:8.2f} ms")


def bench_estimate(n_iter=20000):
    print(f"== end-to-end Monte Carlo coverage estimate ({n_iter} iterations) ==")
    params = default_params()
    for name in kernels.available_backends():
        kernels.use_backend(name)
        t0 = time.perf_counter()
        est = montecarlo.estimate("coverage", params, n_iter, seed=3, tau=1.0)
        dt = time.perf_counter() - t0
        print(f"   {name:>7}: {dt:7.2f} s  coverage={est['total'].mean:.4f} "
              f"+/-{est['total'].half_width_95:.4f}")


def main():
    default = kernels.backend_name
    try:
        bench_thinning()
        bench_estimate()
    finally:
        kernels.use_backend(default)


if __name__ == "__main__":
    main()
