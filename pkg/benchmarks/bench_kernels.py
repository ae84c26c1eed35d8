"""Throughput of the numba and numpy kernel backends.

Usage: python benchmarks/bench_kernels.py [--replicas 64] [--steps 20000] [--d 8]

Both backends consume the same uniforms, so the checksum column should
agree.  The first numba call (compilation, or cache load) is excluded.
"""
import argparse
import time

import numpy as np

from qsdkit import _kernels
from qsdkit.chain import random_chain, uniform
from qsdkit.schedules import power


def bench_sa(chain, backend, R, m, seed=0):
    rng = np.random.default_rng(seed)
    cum = _kernels.cumulative_rows(chain.p_hat)
    X = np.tile(uniform(chain.d), (R, 1))
    cur = np.zeros(R, dtype=np.int64)
    ab = np.zeros(R, dtype=np.int64)
    g = power(1, 1, 0).gammas(1, m)
    U = rng.random((R, m, 2))
    fn = _kernels.get("sa", backend)
    t0 = time.perf_counter()
    fn(cum, chain.p0, X, cur, ab, g, U, 1, _kernels.RENORM_EVERY)
    return time.perf_counter() - t0, float(X[:, 0].sum())


def bench_fv(chain, backend, R, m, N=1000, seed=0):
    rng = np.random.default_rng(seed)
    cum = _kernels.cumulative_rows(chain.p_hat)
    C = np.tile(np.full(chain.d, N // chain.d), (R, 1))
    C[:, 0] += N - C[0].sum()
    U = rng.random((R, m, 3))
    rec = np.zeros((R, 0, chain.d), dtype=np.int64)
    acc = np.zeros((R, chain.d), dtype=np.int64)
    fn = _kernels.get("fv", backend)
    t0 = time.perf_counter()
    fn(cum, chain.p0, C, N, U, rec, acc)
    return time.perf_counter() - t0, float(C[:, 0].sum())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--replicas", type=int, default=64)
    ap.add_argument("--steps", type=int, default=20_000)
    ap.add_argument("--d", type=int, default=8)
    args = ap.parse_args()

    chain = random_chain(np.random.default_rng(1), args.d)
    backends = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])
    if "numba" in backends:
        bench_sa(chain, "numba", 1, 10)
        bench_fv(chain, "numba", 1, 10)

    total = args.replicas * args.steps
    print(f"d={args.d} replicas={args.replicas} steps={args.steps}")
    print(f"{'kernel':<6} {'backend':<8} {'seconds':>9} {'ns/step':>9} {'checksum':>20}")
    for name, fn in (("sa", bench_sa), ("fv", bench_fv)):
        base = None
        for b in backends:
            dt, chk = fn(chain, b, args.replicas, args.steps)
            base = base or dt
            print(f"{name:<6} {b:<8} {dt:9.3f} {1e9 * dt / total:9.1f} {chk:20.12f}  x{base / dt:.1f}")


if __name__ == "__main__":
    main()
