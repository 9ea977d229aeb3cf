import math

import numpy as np
import pytest

from spmimo import Scheme, SystemConfig, table1_config
from spmimo.closed_form import LsfSnapshot, sinr
from spmimo.geometry import sample_network
from spmimo.montecarlo.engine import (LinkSet, _sp_draws, empirical_sinr, evaluate_sp,
                                      neff_variance, sp_features_from_draws)
from spmimo.montecarlo.estimation import (draw_fading, estimate_rp, estimate_sp,
                                          lmmse_from_full, received_pilot_signal)
from spmimo.montecarlo.pilots import PilotBook, dft_pilots, draw_assignments, draw_pilot_book


def _snap(gen, n=3, K=2):
    b = gen.uniform(0.2, 1.0, (n, K))
    b[0] += 1.0
    serving = b.copy()
    serving[1:] += 1.0
    return LsfSnapshot(serving, b, gen.uniform(0.5, 1.5, (n, K)), gen.uniform(0.5, 1.5, (n, K)))


def test_dft_pilots_orthogonal():
    P = dft_pilots(7)
    assert np.allclose(P @ P.conj().T, 7 * np.eye(7))
    assert np.allclose(np.abs(P), 1.0)


def test_assignments_distinct_within_cell(gen):
    a = draw_assignments(gen, 50, 4, 3, 5)
    assert a.shape == (50, 4, 3)
    assert all(np.unique(row).size == 3 for row in a.reshape(-1, 3))
    with pytest.raises(ValueError):
        draw_assignments(gen, 1, 2, 4, 3)
    with pytest.raises(ValueError):
        PilotBook(np.array([[0, 0]]), 3)
    book = PilotBook(np.array([[0, 1], [1, 0]]), 2)
    assert book.chi.tolist() == [[1, 0], [0, 1]]


@pytest.mark.parametrize("superimposed", [False, True])
def test_despread_estimate_is_lmmse(gen, superimposed):
    snap = _snap(gen)
    tau = 5
    cfg = SystemConfig(M=4, K=2, tau_c=tau, tau_p=tau, delta=0.5, rho=1.0, sigma2=0.2)
    book = draw_pilot_book(gen, 3, 2, tau)
    draw = draw_fading(gen, snap, 4, tau, cfg.sigma2)
    est = (estimate_sp if superimposed else estimate_rp)(snap, book, draw, cfg)
    Y = received_pilot_signal(snap, book, draw, superimposed)
    assert np.allclose(est.h_hat, lmmse_from_full(Y, snap, book, cfg.sigma2, superimposed),
                       rtol=1e-12, atol=1e-14)


def _brute_stats(links, M, tau, delta, scheme, group, H, S, Nz):
    """Data-estimate statistics from the explicit received matrix."""
    B = H.shape[0]
    q, p = delta * links.aq ** 2, (1 - delta) * links.ad ** 2
    phi = dft_pilots(tau)
    out = np.zeros((B, links.typ.size, 5))
    for b in range(B):
        pil = np.sqrt(q)[:, None] * phi[group[b]]
        X = pil + np.sqrt(p)[:, None] * S[b]
        Y = H[b].T @ X + Nz[b]
        if scheme is Scheme.SP_PERFSUB:
            Yd = Y - H[b].T @ pil
        elif scheme is Scheme.SP_ESTSUB:
            gq = np.zeros(tau)
            np.add.at(gq, group[b], links.aq ** 2 * links.beta)
            tp = delta * tau * gq
            gam = tp / (tp + (1 - delta) * np.sum(links.ad ** 2 * links.beta) + links.sigma2)
            Yd = Y - ((Y @ phi.conj().T / tau) * gam) @ phi
        else:
            Yd = Y
        for t, u in enumerate(links.typ):
            ph = phi[group[b, u]]
            z = Y @ ph.conj() / math.sqrt(tau)
            v = z / (math.sqrt(q[u]) * math.sqrt(tau * M * links.beta[u]))
            r = v.conj() @ Yd
            h2 = np.sum(np.abs(H[b, u]) ** 2)
            res = r - math.sqrt(p[u]) * h2 / math.sqrt(M * links.beta[u]) * S[b, u]
            w = res * ph.conj()
            out[b, t] = [h2, h2 ** 2, w.real.mean(), w.imag.mean(), np.mean(np.abs(w) ** 2)]
    return out


@pytest.mark.parametrize("scheme", [Scheme.SP_NOSUB, Scheme.SP_ESTSUB, Scheme.SP_PERFSUB])
@pytest.mark.parametrize("delta", [0.2, 0.7])
def test_sp_features_match_explicit_model(gen, scheme, delta):
    snap = _snap(gen)
    cfg = SystemConfig(M=3, K=2, tau_c=6, tau_p=2, delta=0.5, rho=1.0, sigma2=0.3)
    links = LinkSet.from_snapshot(snap, cfg, scheme)
    group, H, S, Nz = _sp_draws(gen, links, 3, 6, 4)
    feat = sp_features_from_draws(links, 3, 6, group, H, S, Nz)
    got = evaluate_sp(feat, delta, scheme)
    want = _brute_stats(links, 3, 6, delta, scheme, group, H, S, Nz)
    assert np.allclose(got, want, rtol=1e-10, atol=1e-12)


def test_linkset_powers_independent_of_delta(gen):
    snap = _snap(gen)
    cfg = SystemConfig(M=3, K=2, tau_c=6, tau_p=2, delta=0.3, rho=1.0, sigma2=0.3)
    a = LinkSet.from_snapshot(snap, cfg, Scheme.SP_NOSUB)
    assert np.allclose(a.aq ** 2 * 0.3, snap.q.reshape(-1))


def test_reproducible_and_thread_invariant():
    cfg = SystemConfig(M=6, K=2, tau_c=12, tau_p=2, delta=0.4, rho=1.0, sigma2=0.5)
    net = sample_network(table1_config(K=2).replace(M=6, tau_c=12, tau_p=2), 0, n_av=4)
    for scheme in (Scheme.RP, Scheme.SP_NOSUB):
        a = empirical_sinr(scheme, net, cfg, 300, 7)
        b = empirical_sinr(scheme, net, cfg, 300, 7, threads=3)
        c = empirical_sinr(scheme, net, cfg, 300, 8)
        assert np.array_equal(a.sinr, b.sinr)
        assert not np.array_equal(a.sinr, c.sinr)
    with pytest.raises(ValueError):
        empirical_sinr(Scheme.RP, net, cfg, 50, 0)


def test_mc_close_to_closed_form_quick(gen):
    snap = _snap(gen)
    cfg = SystemConfig(M=8, K=2, tau_c=10, tau_p=2, delta=0.4, rho=1.0, sigma2=0.3)
    for scheme in (Scheme.RP, Scheme.SP_NOSUB, Scheme.SP_PERFSUB):
        est = empirical_sinr(scheme, snap, cfg, 4000, 1, ks=[0])
        ref = sinr(scheme, snap, cfg).sinr
        assert abs(est.sinr[0] - ref) <= est.ci_half(0.999)[0], scheme
    v, se, dof = neff_variance(snap, cfg, 4000, 2, ks=[0])
    assert v[0] > 0 and se[0] > 0 and dof == 19


def test_summary_serializable(gen):
    import json
    snap = _snap(gen)
    cfg = SystemConfig(M=4, K=2, tau_c=8, tau_p=2, delta=0.5, rho=1.0, sigma2=0.3)
    est = empirical_sinr(Scheme.SP_NOSUB, snap, cfg, 200, 0)
    s = json.loads(json.dumps(est.summary()))
    assert s["scheme"] == "sp_nosub" and len(s["sinr"]) == 2 and "var_neff" in s
