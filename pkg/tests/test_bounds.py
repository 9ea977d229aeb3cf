from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from spmimo import Scheme, table1_config
from spmimo.bounds import (BoundDomainError, BoundInputs, best_delta, best_tau_p, lb_breakdown,
                           lb_rate, lb_rate_rp, lb_sinr_rp, lb_sinr_sp, lb_sinr_sp_ub)
from spmimo.optimizer import optimize_tau_p, ternary_search_int

ALPHA, SNR = Fraction(376, 100), Fraction(1, 4)


def _b(**kw):
    base = dict(M=100, K=10, tau_c=200, tau_p=40, delta=0.5, snr=0.25, alpha=3.76)
    base.update(kw)
    return BoundInputs(**base)


def test_rp_bound_exact():
    want = oracles.lb_rp_sinr(100, 10, 40, ALPHA, SNR)
    assert lb_sinr_rp(_b()) == pytest.approx(float(want), rel=1e-13)


@pytest.mark.parametrize("delta", [Fraction(1, 5), Fraction(1, 2), Fraction(9, 10)])
def test_sp_bounds_exact(delta):
    b = _b(delta=float(delta))
    assert lb_sinr_sp(b) == pytest.approx(
        float(oracles.lb_sp_sinr(100, 10, 200, delta, ALPHA, SNR)), rel=1e-13)
    assert lb_sinr_sp_ub(b) == pytest.approx(
        float(oracles.lb_sp_ub_sinr(100, 10, 200, delta, ALPHA, SNR)), rel=1e-13)


def test_breakdown_consistent():
    for scheme in (Scheme.RP, Scheme.SP_NOSUB, Scheme.SP_PERFSUB):
        bd = lb_breakdown(scheme, _b())
        assert bd.noise_term == 0.0
        assert lb_rate(scheme, _b()) == pytest.approx(
            (0.8 if scheme is Scheme.RP else 1.0) * __import__("math").log2(1 + bd.sinr))


def test_domain_errors():
    with pytest.raises(BoundDomainError):
        lb_sinr_sp(_b(delta=0.0))
    with pytest.raises(BoundDomainError):
        lb_rate_rp(_b(tau_p=201))
    with pytest.raises(ValueError):
        BoundInputs(M=10, K=2, tau_c=20, tau_p=2, delta=0.5, snr=1.0, alpha=2.0)
    with pytest.raises(ValueError):
        lb_rate(Scheme.SP_ESTSUB, _b())


def test_bandwidth_scaling():
    assert lb_rate(Scheme.RP, _b(), bandwidth=2e7) == pytest.approx(2e7 * lb_rate_rp(_b()))


@given(st.integers(10, 2000), st.integers(1, 20), st.sampled_from([50, 100, 200, 400]),
       st.floats(-15, 15))
def test_rp_bound_unimodal_in_tau_p(M, K, tau_c, snr_db):
    b = BoundInputs(M=M, K=K, tau_c=tau_c, tau_p=K, delta=0.5, snr=10 ** (snr_db / 10),
                    alpha=3.76)
    f = lambda t: lb_rate_rp(b.replace(tau_p=t))  # noqa: E731
    assert optimize_tau_p(f, K, tau_c) == ternary_search_int(f, K, tau_c)


@given(st.integers(10, 1000), st.floats(0.05, 0.95))
def test_ub_bound_above_nosub(M, delta):
    b = _b(M=M, delta=delta)
    assert lb_sinr_sp_ub(b) >= lb_sinr_sp(b)


def test_best_parameters_on_table1():
    b = BoundInputs.from_config(table1_config())
    t, v = best_tau_p(b)
    assert 10 <= t <= 200 and v == pytest.approx(lb_rate_rp(b.replace(tau_p=t)))
    d, v = best_delta(Scheme.SP_PERFSUB, b)
    assert 0 < d < 1 and v >= lb_rate(Scheme.SP_PERFSUB, b.replace(delta=0.5))
