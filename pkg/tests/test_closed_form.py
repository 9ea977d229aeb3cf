from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from spmimo import Scheme, SystemConfig, table1_config
from spmimo.closed_form import (DegenerateConfigError, LsfSnapshot, gamma_rp, gamma_sp,
                                network_rates, network_sinr, rate, sinr, sinr_rp, sinr_sp,
                                sinr_sp_ub, var_neff_sp)
from spmimo.geometry import sample_network


def _rand_frac(g, lo, hi):
    return Fraction(int(g.integers(lo, hi)), 10)


def _instance(g, n=3, K=2):
    beta = [[_rand_frac(g, 1, 20) for _ in range(K)] for _ in range(n)]
    p = [[_rand_frac(g, 2, 20) for _ in range(K)] for _ in range(n)]
    q = [[_rand_frac(g, 2, 20) for _ in range(K)] for _ in range(n)]
    serving = np.array([[float(b) for b in row] for row in beta])
    serving[1:] += 1.0
    snap = LsfSnapshot(serving, np.array(beta, dtype=float), np.array(p, dtype=float),
                       np.array(q, dtype=float))
    return beta, p, q, snap


FNS = {Scheme.RP: (sinr_rp, oracles.rp_terms), Scheme.SP_NOSUB: (sinr_sp, oracles.sp_terms),
       Scheme.SP_PERFSUB: (sinr_sp_ub, oracles.sp_ub_terms)}


@pytest.mark.parametrize("scheme", list(FNS))
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_components_match_exact_oracle(scheme, seed):
    g = np.random.default_rng(seed)
    beta, p, q, snap = _instance(g)
    M, tau_p, tau_c, s2 = 12, 3, 17, Fraction(3, 10)
    cfg = SystemConfig(M=M, K=2, tau_c=tau_c, tau_p=tau_p, delta=0.5, rho=1.0, sigma2=0.3)
    fn, oracle = FNS[scheme]
    got = fn(snap, cfg)
    want = oracle(beta, p, q, M, tau_p if scheme is Scheme.RP else tau_c, s2)
    comps = (got.coherent_gain, got.pilot_contamination, got.extra_coherent, got.non_coherent,
             got.noise_term)
    for a, b in zip(comps, want):
        assert a == pytest.approx(float(b), rel=1e-13, abs=1e-15)
    assert got.sinr == pytest.approx(float(oracles.sinr(want)), rel=1e-13)


def test_single_user_example():
    # M = K = tau_p = 1 and rho beta = sigma2: gamma = 1/2 and the own
    # signal power also enters the non-coherent term, so SINR = 1/4
    cfg = SystemConfig(M=1, K=1, tau_c=10, tau_p=1, delta=0.5, rho=1.0, sigma2=1.0)
    snap = LsfSnapshot(np.ones((1, 1)), np.ones((1, 1)), np.ones((1, 1)), np.ones((1, 1)))
    assert gamma_rp(snap, cfg) == pytest.approx(0.5)
    assert sinr_rp(snap, cfg).sinr == pytest.approx(0.25)


def test_gammas_in_unit_interval(gen):
    _, _, _, snap = _instance(gen)
    cfg = SystemConfig(M=8, K=2, tau_c=20, tau_p=2, delta=0.5, rho=1.0, sigma2=0.1)
    assert 0 < gamma_rp(snap, cfg) < 1 and 0 < gamma_sp(snap, cfg) < 1


pos = st.floats(0.05, 5.0)


@given(st.lists(pos, min_size=12, max_size=12), st.integers(1, 200),
       st.floats(0.05, 0.95))
def test_sinr_properties(vals, M, delta):
    b = np.array(vals[:6]).reshape(3, 2)
    serving = b.copy()
    serving[1:] += 1.0
    snap = LsfSnapshot(serving, b, np.array(vals[6:9] * 2).reshape(3, 2),
                       np.array(vals[9:] * 2).reshape(3, 2))
    cfg = SystemConfig(M=M, K=2, tau_c=20, tau_p=4, delta=delta, rho=1.0, sigma2=0.2)
    s = {sch: sinr(sch, snap, cfg).sinr for sch in FNS}
    assert all(v > 0 and np.isfinite(v) for v in s.values())
    # perfect subtraction removes terms, so it can only help
    assert s[Scheme.SP_PERFSUB] >= s[Scheme.SP_NOSUB]
    # more antennas never hurt
    bigger = cfg.replace(M=M + 10)
    for sch in FNS:
        assert sinr(sch, snap, bigger).sinr >= s[sch]


def test_var_neff_identity(gen):
    _, _, _, snap = _instance(gen)
    cfg = SystemConfig(M=8, K=2, tau_c=20, tau_p=2, delta=0.5, rho=1.0, sigma2=0.1)
    b = sinr_sp(snap, cfg)
    assert var_neff_sp(snap, cfg) == pytest.approx(b.denominator - snap.p[0, 0]
                                                  * snap.beta_serving[0, 0])


def test_degenerate_inputs(gen):
    _, _, _, snap = _instance(gen)
    cfg = SystemConfig(M=8, K=2, tau_c=20, tau_p=2, delta=0.5, rho=1.0, sigma2=0.1)
    zero_q = LsfSnapshot(snap.beta_serving, snap.beta_cross, snap.p, np.zeros_like(snap.q))
    with pytest.raises(DegenerateConfigError):
        sinr_rp(zero_q, cfg)
    net = sample_network(table1_config(), 0, n_av=6)
    with pytest.raises(DegenerateConfigError):
        network_sinr(net, table1_config(), Scheme.SP_NOSUB, delta=1.0)
    assert rate(Scheme.RP, snap, cfg.replace(tau_p=20)).rate_bps == 0.0
    with pytest.raises(ValueError):
        sinr(Scheme.SP_ESTSUB, snap, cfg)


def test_snapshot_validation(gen):
    b = np.ones((2, 2))
    with pytest.raises(ValueError):
        LsfSnapshot(b, b * 2, b, b)          # own-cell cross gain must equal serving gain
    with pytest.raises(ValueError):
        LsfSnapshot(b, b, -b, b)


def test_network_batch_matches_snapshots():
    cfg = table1_config(K=3, tau_p=3)
    net = sample_network(cfg, 4, n_av=8)
    for scheme in (Scheme.RP, Scheme.SP_NOSUB, Scheme.SP_PERFSUB):
        terms = network_sinr(net, cfg, scheme)
        for cell in (0, net.n_bs - 1):
            for k in range(cfg.K):
                snap = LsfSnapshot.from_network(net, cfg, scheme, cell=cell, k=k)
                assert terms.sinr[cell, k] == pytest.approx(sinr(scheme, snap, cfg).sinr,
                                                            rel=1e-10)
    r = network_rates(net, cfg, Scheme.RP, tau_p=5)
    assert r.shape == (net.n_bs, cfg.K) and np.all(r > 0)


def test_channel_inversion_equalizes_cells():
    # with p = rho/beta_serving the SINR depends on the cell only
    cfg = table1_config()
    net = sample_network(cfg, 2, n_av=10)
    s = network_sinr(net, cfg, Scheme.SP_NOSUB).sinr
    assert np.allclose(s, s[:, :1], rtol=1e-9)


def test_sp_large_tau_c_limit(gen):
    _, _, _, snap = _instance(gen)
    vals = [sinr_sp(snap, SystemConfig(M=8, K=2, tau_c=tc, tau_p=2, delta=0.5, rho=1.0,
                                       sigma2=0.3)).sinr for tc in (10, 100, 10 ** 4, 10 ** 7)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    lim = 8 * snap.p[0, 0] * snap.beta_serving[0, 0] / (
        float(np.sum((snap.q + snap.p) * snap.beta_cross)) + 0.3)
    assert vals[-1] == pytest.approx(lim, rel=1e-3)
