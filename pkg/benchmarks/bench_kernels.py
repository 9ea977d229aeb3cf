"""Time the compiled kernels against their numpy fallbacks.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5]

Both variants are called directly, so the ``SPMIMO_DISABLE_NUMBA`` flag does
not matter here; it only selects which variant the library dispatches to.
Each pair is also checked for agreement.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from spmimo import kernels as kn
from spmimo._accel import NUMBA_AVAILABLE


def _cn(gen, shape):
    return (gen.standard_normal(shape) + 1j * gen.standard_normal(shape)) / np.sqrt(2.0)


def cases(gen):
    n, K = 50, 10
    beta = gen.uniform(1e-3, 1.0, (n, n, K))
    p = gen.uniform(0.5, 2.0, (n, K))
    q = gen.uniform(0.5, 2.0, (n, K))
    yield "interference_aggregates (n=50, K=10)", (
        kn.interference_aggregates_numba, kn.interference_aggregates_numpy,
        (beta, p, q, np.arange(n)))

    side = 1.0
    pts = gen.random((2000, 2))
    centers = gen.random((50, 2))
    yield "nearest_index_torus (2000 pts, 50 BSs)", (
        kn.nearest_index_torus_numba, kn.nearest_index_torus_numpy, (pts, centers, side))

    owner = gen.integers(0, 50, 5000)
    yield "accept_first_k (5000 proposals)", (
        lambda o, K: kn.accept_first_k_numba(o, np.zeros(50, np.int64), K),
        lambda o, K: kn.accept_first_k_numpy(o, np.zeros(50, np.int64), K), (owner, 10))

    B, N, M, T, tp = 64, 200, 100, 10, 20
    H = _cn(gen, (B, N, M))
    group = gen.integers(0, tp, (B, N))
    nbar = _cn(gen, (B, T, M))
    nz = _cn(gen, (B, M))
    aq = gen.uniform(0.5, 2.0, N)
    ad = gen.uniform(0.5, 2.0, N)
    typ = np.arange(T, dtype=np.int64)
    yield "rp_draw_stats (B=64, N=200, M=100)", (
        kn.rp_draw_stats_numba, kn.rp_draw_stats_numpy,
        (H, group, nbar, nz, aq, ad, tp, np.ones(T), typ))

    r = _cn(gen, (64, T, 200))
    phi = _cn(gen, (64, T, 200))
    yield "sp_residual_stats (B=64, T=10, tau=200)", (
        kn.sp_residual_stats_numba, kn.sp_residual_stats_numpy, (r, phi))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not NUMBA_AVAILABLE:
        print("numba is not installed; nothing to compare")
        return
    gen = np.random.default_rng(0)
    print(f"{'kernel':44s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}  agree")
    for name, (fa, fb, a) in cases(gen):
        ra, rb = fa(*a), fb(*a)            # also triggers compilation
        agree = np.allclose(ra, rb, rtol=1e-10, atol=1e-12)
        ta = min(timeit.repeat(lambda: fa(*a), number=1, repeat=args.repeat)) * 1e3
        tb = min(timeit.repeat(lambda: fb(*a), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:44s} {ta:10.3f} {tb:10.3f} {tb / ta:8.1f}  {agree}")


if __name__ == "__main__":
    main()
