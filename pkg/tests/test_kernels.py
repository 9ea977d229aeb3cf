import os
import subprocess
import sys

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from spmimo import kernels as kn


def _cn(gen, shape):
    return gen.standard_normal(shape) + 1j * gen.standard_normal(shape)


@given(st.integers(2, 6), st.integers(1, 3), st.integers(0, 2 ** 31))
def test_aggregates_backends_agree(n, K, seed):
    g = np.random.default_rng(seed)
    beta = g.uniform(1e-3, 1, (n, n, K))
    p, q = g.uniform(0.1, 2, (n, K)), g.uniform(0.1, 2, (n, K))
    own = np.arange(n)
    a = kn.interference_aggregates_numba(beta, p, q, own)
    b = kn.interference_aggregates_numpy(beta, p, q, own)
    assert np.allclose(a, b, rtol=1e-12)


def test_aggregates_definition(gen):
    n, K = 3, 2
    beta = gen.uniform(0.1, 1, (1, n, K))
    p, q = gen.uniform(0.1, 2, (n, K)), gen.uniform(0.1, 2, (n, K))
    a = kn.interference_aggregates(beta, p, q, np.array([0]))[0]
    b = beta[0]
    other = np.arange(n) != 0
    expect = [np.sum(p * b), np.sum((q * b)[other]), np.sum(q * b),
              np.sum((p * q * b * b)[other]), np.sum((q * q * b * b)[other]),
              np.sum(p * p * b * b), np.sum(p * q * b * b)]
    assert np.allclose(a, expect, rtol=1e-13)


@given(st.integers(0, 2 ** 31))
def test_spatial_kernels_agree(seed):
    g = np.random.default_rng(seed)
    pts, centers = g.random((40, 2)), g.random((5, 2))
    assert np.array_equal(kn.nearest_index_torus_numba(pts, centers, 1.0),
                          kn.nearest_index_torus_numpy(pts, centers, 1.0))
    owner = g.integers(0, 5, 40)
    c1, c2 = np.zeros(5, np.int64), np.zeros(5, np.int64)
    assert np.array_equal(kn.accept_first_k_numba(owner, c1, 3),
                          kn.accept_first_k_numpy(owner, c2, 3))
    assert np.array_equal(c1, c2) and c1.max() <= 3


@given(st.integers(0, 2 ** 31))
def test_draw_kernels_agree(seed):
    g = np.random.default_rng(seed)
    B, N, M, T, tp = 3, 6, 4, 2, 3
    args = (_cn(g, (B, N, M)), g.integers(0, tp, (B, N)), _cn(g, (B, T, M)), _cn(g, (B, M)),
            g.uniform(0.5, 2, N), g.uniform(0.5, 2, N), tp, g.uniform(0.5, 2, T),
            np.array([0, 1], dtype=np.int64))
    assert np.allclose(kn.rp_draw_stats_numba(*args), kn.rp_draw_stats_numpy(*args))
    r, ph = _cn(g, (B, T, 8)), _cn(g, (B, T, 8))
    assert np.allclose(kn.sp_residual_stats_numba(r, ph), kn.sp_residual_stats_numpy(r, ph))


def test_env_flag_selects_numpy():
    code = "from spmimo._accel import backend_name; print(backend_name())"
    env = dict(os.environ, SPMIMO_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True).stdout.strip()
    assert out == "numpy"
    env["SPMIMO_DISABLE_NUMBA"] = ""
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True).stdout.strip()
    assert out == "numba"
