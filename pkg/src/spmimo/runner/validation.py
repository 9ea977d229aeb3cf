"""Self-check suite: independent oracles and cross-module invariants.

Every check returns a :class:`Check` with the observed value, the expected
value and the tolerance, so a failure report is self-explanatory.
"""
from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import stats

from ..asymptotics import lambert_w0, limit_sinr, zeta_max
from ..bounds import BoundInputs, lb_rate, lb_rate_rp, lb_sinr_rp
from ..closed_form import LsfSnapshot, network_rates, sinr_rp, sinr_sp, var_neff_sp
from ..closed_form import sinr as cf_sinr
from ..core import Scheme, SystemConfig, table1_config, table1_power_model
from ..energy import avg_tx_power
from ..geometry import (expected_d_alpha, lsf_moment_check, rayleigh_cdf,
                        sample_network_retry, typical_user_draws)
from ..montecarlo.engine import empirical_sinr, neff_variance
from ..montecarlo.estimation import draw_fading, estimate_rp, estimate_sp
from ..montecarlo.pilots import draw_pilot_book
from ..montecarlo.stats import mean_and_se, t_quantile
from ..optimizer import optimize_tau_p, ternary_search_int
from ..rng import substream
from .experiments import aggregate_point, evaluate_network
from .specfile import parse_spec

__all__ = ["Check", "ValidationReport", "validate_suite", "CHECKS"]


@dataclass
class Check:
    name: str
    passed: bool
    observed: object
    expected: object
    tolerance: object
    note: str = ""
    seconds: float = 0.0


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"passed": self.passed, "n_checks": len(self.checks),
                "n_failed": len(self.failures),
                "checks": [dataclasses.asdict(c) for c in self.checks]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_jsonable)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return str(x)


def _f(x):
    return [float(v) for v in np.ravel(x)] if np.ndim(x) else float(x)


# ------------------------------------------------------------------ checks

def check_rayleigh_ks(seed: int) -> Check:
    cfg = table1_config()
    d = typical_user_draws(cfg, 10_000, seed, n_av=200.0)["first_distance"]
    p = stats.kstest(d, lambda r: rayleigh_cdf(r, cfg.density)).pvalue
    return Check("serving_distance_rayleigh_ks", p > 0.01, float(p), "> 0.01", "KS 1% level")


def check_lsf_moments(seed: int) -> Check:
    rep = lsf_moment_check(table1_config(), 2000, seed)
    zs = [rep.d_alpha.z, rep.kappa[1].z, rep.kappa[2].z]
    ok = all(abs(z) <= 3.0 for z in zs) and rep.cross.mean <= rep.cross.reference + 3 * rep.cross.se
    return Check("lsf_moments", ok, {"z_d_alpha": zs[0], "z_kappa1": zs[1], "z_kappa2": zs[2],
                                     "cross": rep.cross.mean},
                 {"cross_bound": rep.cross.reference}, "|z| <= 3")


def _small_snapshot(gen, n=3, K=2):
    beta = gen.uniform(0.2, 1.0, (n, K))
    beta[0] = gen.uniform(1.0, 2.0, K)
    serving = gen.uniform(1.0, 2.0, (n, K))
    serving[0] = beta[0]
    return LsfSnapshot(serving, beta, gen.uniform(0.5, 1.5, (n, K)),
                       gen.uniform(0.5, 1.5, (n, K)))


def _estimate_quality(seed: int, superimposed: bool, n_draws: int = 10_000):
    gen = substream(seed, 7, int(superimposed))
    snap = _small_snapshot(gen)
    M, tau = 4, 6
    cfg = SystemConfig(M=M, K=2, tau_c=tau, tau_p=tau, delta=0.5, rho=1.0, sigma2=0.3)
    book = draw_pilot_book(gen, 3, 2, tau)
    est = estimate_sp if superimposed else estimate_rp
    vals, cross = [], []
    gbar = None
    for _ in range(n_draws):
        draw = draw_fading(gen, snap, M, tau, cfg.sigma2)
        out = est(snap, book, draw, cfg)
        gbar = out.gamma_bar
        vals.append(np.vdot(out.h_hat, out.h_hat).real / M)
        if superimposed:
            phi = book.sequences()[0, 0]
            u = np.sum(draw.s[0, 0] * phi.conj()) / tau
            cross.append(np.vdot(draw.h[0, 0], out.h_hat) * np.conj(u) / M)
    return snap, gbar, np.array(vals), np.array(cross)


def check_estimate_quality_rp(seed: int) -> Check:
    snap, g, v, _ = _estimate_quality(seed, False)
    m, se = mean_and_se(v)
    exp = g * snap.beta_serving[0, 0]
    return Check("estimate_quality_rp", abs(m - exp) <= 3 * se, m, exp, f"3 s.e. = {3 * se:.3g}")


def check_estimate_quality_sp(seed: int) -> Check:
    snap, g, v, cross = _estimate_quality(seed, True)
    m, se = mean_and_se(v)
    exp = g * snap.beta_serving[0, 0]
    cm, cse = mean_and_se(cross.real)
    ok = abs(m - exp) <= 3 * se and abs(cm) > 3 * cse
    return Check("estimate_quality_sp", ok, {"mean_sq": m, "data_corr": cm},
                 {"mean_sq": exp, "data_corr": "nonzero"}, f"3 s.e. ({3 * se:.3g}, {3 * cse:.3g})")


def _table1_mc(seed, scheme, delta, n_fading, n_av=20.0):
    cfg = table1_config(delta=delta)
    net = sample_network_retry(cfg, seed, 0, n_av=n_av)
    est = empirical_sinr(scheme, net, cfg, n_fading, seed)
    snap_sinr = []
    for k in range(cfg.K):
        snap = LsfSnapshot.from_network(net, cfg, scheme, cell=0, k=k)
        b = sinr_rp(snap, cfg) if scheme is Scheme.RP else sinr_sp(snap, cfg)
        snap_sinr.append(b.sinr)
    half = est.ci_half(0.95, n_tests=cfg.K)
    ok = bool(np.all(np.abs(est.sinr - np.array(snap_sinr)) <= half))
    return ok, est.sinr, np.array(snap_sinr), half


def check_mc_rp_table1(seed: int, n_fading: int = 500) -> Check:
    ok, obs, exp, half = _table1_mc(seed, Scheme.RP, 0.5, n_fading)
    return Check("mc_vs_closed_form_rp_table1", ok, _f(obs), _f(exp), _f(half),
                 "Bonferroni 95% over the cell's UEs")


def check_mc_sp_table1(seed: int, n_fading: int = 500) -> Check:
    ok, obs, exp, half = _table1_mc(seed, Scheme.SP_NOSUB, 0.36, n_fading)
    return Check("mc_vs_closed_form_sp_nosub_table1", ok, _f(obs), _f(exp), _f(half),
                 "delta = 0.36, Bonferroni 95% over the cell's UEs")


def _rational_rp(beta, q, p, M, tau_p, sigma2):
    """SINR of UE (0, 0) under regular pilots in exact arithmetic.

    Each UE of another cell shares the typical pilot with probability
    ``1 / tau_p``. Written from the model, not from the aggregate algebra of
    the library.
    """
    n, K = len(beta), len(beta[0])
    B0, Q0, P0 = beta[0][0], q[0][0], p[0][0]
    other = [(l, i) for l in range(1, n) for i in range(K)]
    gamma = (Fraction(tau_p) * Q0 * B0
             / (tau_p * Q0 * B0 + sum(q[l][i] * beta[l][i] for l, i in other) + sigma2))
    pc = Fraction(M, tau_p) * sum(p[l][i] * q[l][i] * beta[l][i] ** 2
                                  for l, i in other) / (Q0 * B0)
    nc = (sum(p[l][i] * beta[l][i] for l in range(n) for i in range(K)) + sigma2) / gamma
    return M * P0 * B0 / (pc + nc)


def check_rational_rp(seed: int) -> Check:
    beta = [[Fraction(3, 2), Fraction(7, 10)], [Fraction(1, 5), Fraction(2, 5)]]
    q = [[Fraction(1), Fraction(6, 5)], [Fraction(4, 5), Fraction(1, 2)]]
    p = [[Fraction(1, 2), Fraction(3, 4)], [Fraction(1), Fraction(9, 10)]]
    M, tau_p, s2 = 16, 2, Fraction(1, 10)
    exact = _rational_rp(beta, q, p, M, tau_p, s2)
    snap = LsfSnapshot(np.array([[1.5, 0.7], [1.1, 0.9]]), np.array(beta, dtype=float),
                       np.array(p, dtype=float), np.array(q, dtype=float))
    cfg = SystemConfig(M=M, K=2, tau_c=200, tau_p=tau_p, delta=0.5, rho=1.0, sigma2=0.1)
    obs = sinr_rp(snap, cfg).sinr
    rel = abs(obs - float(exact)) / float(exact)
    return Check("rational_oracle_sinr_rp", rel < 1e-13, obs, float(exact), "rel 1e-13")


def check_sp_tau_c_limit(seed: int) -> Check:
    gen = substream(seed, 8)
    snap = _small_snapshot(gen)
    vals = []
    for tc in (10, 100, 1000, 10 ** 4, 10 ** 5, 10 ** 7):
        cfg = SystemConfig(M=8, K=2, tau_c=tc, tau_p=2, delta=0.5, rho=1.0, sigma2=0.3)
        vals.append(sinr_sp(snap, cfg).sinr)
    B0, P0 = snap.beta_serving[0, 0], snap.p[0, 0]
    lim = 8 * P0 * B0 / (float(np.sum((snap.q + snap.p) * snap.beta_cross)) + 0.3)
    mono = all(b >= a for a, b in zip(vals, vals[1:]))
    rel = abs(vals[-1] - lim) / lim
    return Check("sp_large_tau_c_limit", mono and rel < 1e-3, _f(vals), lim,
                 "monotone, rel 1e-3 at tau_c = 1e7")


def check_lambert(seed: int) -> Check:
    lo, hi = 0.0, 3.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if mid * math.exp(mid) < 10.0 else (lo, mid)
    w = float(lambert_w0(10.0))
    return Check("lambert_w_bisection", abs(w - 0.5 * (lo + hi)) < 1e-12, w, 0.5 * (lo + hi),
                 1e-12)


def check_zeta_max(seed: int) -> Check:
    z_small = float(zeta_max(1e-8))
    grid = np.linspace(0.0, 1.0, 2_000_001)
    arg = float(grid[np.argmax((1 - grid) * np.log2(1 + grid * 10.0))])
    z10 = float(zeta_max(10.0))
    ok = abs(z_small - 0.5) < 1e-3 and abs(z10 - arg) < 1e-4
    return Check("zeta_max", ok, {"sir_1e-8": z_small, "sir_10": z10},
                 {"sir_1e-8": 0.5, "sir_10": arg}, {"sir_1e-8": 1e-3, "sir_10": 1e-4})


def check_zeta_integer(seed: int) -> Check:
    tc = 200
    worst = 0
    for sir in (0.5, 2.0, 10.0, 50.0, 300.0):
        taus = np.arange(1, tc + 1)
        obj = (1 - taus / tc) * np.log2(1 + taus / tc * sir)
        worst = max(worst, abs(int(taus[np.argmax(obj)]) - round(float(zeta_max(sir)) * tc)))
    return Check("zeta_max_integer_argmax", worst <= 1, worst, 0, 1)


def check_large_m_limit(seed: int) -> Check:
    gen = substream(seed, 9)
    worst = 0.0
    for _ in range(10):
        snap = _small_snapshot(gen, n=4, K=3)
        for scheme in (Scheme.RP, Scheme.SP_NOSUB, Scheme.SP_PERFSUB):
            cfg = SystemConfig(M=10 ** 6, K=3, tau_c=24, tau_p=3, delta=0.4, rho=1.0,
                               sigma2=0.3)
            s = cf_sinr(scheme, snap, cfg).sinr
            lim = limit_sinr(scheme, snap, cfg)
            worst = max(worst, abs(s - lim) / lim)
    return Check("large_m_limit", worst < 1e-3, worst, 0.0, "rel 1e-3")


def _rational_lb_rp(M, K, tau_p, alpha, snr):
    s2r = 1 / snr
    den = (Fraction(M * K) / (tau_p * (alpha - 1)) + Fraction(K * K) / (tau_p * (alpha - 1))
           + (1 + Fraction(K, tau_p) * 2 / (alpha - 2) + s2r / tau_p)
           * (alpha * K / (alpha - 2) + s2r))
    return M / den


def check_bound_oracle(seed: int) -> Check:
    alpha, snr = Fraction(376, 100), Fraction(1, 4)
    exact = _rational_lb_rp(100, 10, 40, alpha, snr)
    b = BoundInputs(M=100, K=10, tau_c=200, tau_p=40, delta=0.5, snr=0.25, alpha=3.76)
    obs = lb_sinr_rp(b)
    rel = abs(obs - float(exact)) / float(exact)
    return Check("rational_oracle_bound_rp", rel < 1e-12, obs, float(exact), "rel 1e-12")


def check_bound_unimodal(seed: int) -> Check:
    b = BoundInputs.from_config(table1_config())
    f = lambda t: lb_rate_rp(b.replace(tau_p=t))
    ex = optimize_tau_p(f, 10, 200)[0]
    te = ternary_search_int(f, 10, 200)[0]
    return Check("bound_tau_p_exhaustive_equals_ternary", ex == te, te, ex, 0)


def check_jensen(seed: int, n_networks: int = 100) -> Check:
    cfg = table1_config()
    b = BoundInputs.from_config(cfg)
    out, ok = {}, True
    for scheme, kw in ((Scheme.RP, {"tau_p": 40}), (Scheme.SP_NOSUB, {"delta": 0.36}),
                       (Scheme.SP_PERFSUB, {"delta": 0.6})):
        bb = b.replace(**kw)
        lb = lb_rate(scheme, bb)
        r = [float(network_rates(sample_network_retry(cfg, seed, i, n_av=20.0), cfg, scheme,
                                 **kw).mean()) for i in range(n_networks)]
        m, se = mean_and_se(np.array(r))
        half = t_quantile(0.95, n_networks - 1) * se
        ok &= lb <= m + half
        out[scheme.value] = {"bound": lb, "lsf_mean": m, "ci_half": half}
    return Check("jensen_bound_below_lsf_mean", bool(ok), out, "bound <= mean + ci_half",
                 "95% CI")


def check_gamma_oracle(seed: int) -> Check:
    cfg, pm = table1_config(), table1_power_model()
    exact = (cfg.bandwidth / pm.eta * cfg.K * cfg.rho * cfg.omega
             * math.gamma(cfg.alpha / 2 + 1) / (math.pi * cfg.density) ** (cfg.alpha / 2))
    obs = avg_tx_power(cfg, pm)
    return Check("avg_tx_power_gamma_oracle", abs(obs - exact) <= 1e-12 * exact, obs, exact,
                 "rel 1e-12")


def check_tx_power_sampling(seed: int) -> Check:
    cfg = table1_config()
    gen = substream(seed, 10)
    d = gen.rayleigh(1.0 / math.sqrt(2 * math.pi * cfg.density), 100_000)
    m, se = mean_and_se(cfg.rho * cfg.omega * d ** cfg.alpha)
    exp = cfg.rho * cfg.omega * expected_d_alpha(cfg.alpha, cfg.density)
    return Check("tx_power_rayleigh_sampling", abs(m - exp) <= 3 * se, m, exp,
                 f"3 s.e. = {3 * se:.3g}")


def check_neff_variance(seed: int, n_fading: int = 20_000) -> Check:
    gen = substream(seed, 11)
    snap = _small_snapshot(gen, n=2, K=2)
    cfg = SystemConfig(M=4, K=2, tau_c=8, tau_p=2, delta=0.4, rho=1.0, sigma2=0.3)
    v, se, dof = neff_variance(snap, cfg, n_fading, seed)
    exp = var_neff_sp(snap, cfg)
    half = t_quantile(0.95, dof) * se[0]
    return Check("neff_variance", abs(v[0] - exp) <= half, float(v[0]), exp, float(half))


def check_orderings(seed: int, n_networks: int = 6, n_fading: int = 200) -> Check:
    spec = parse_spec({"name": "orderings", "scenario": "smoke", "n_networks": n_networks,
                       "n_fading": n_fading, "seed": seed, "n_av": 20,
                       "mc_schemes": ["sp_estsub"], "delta_step_mc": 0.05})
    recs = [evaluate_network(spec, 0, i) for i in range(n_networks)]
    rows = aggregate_point(spec, 0, recs)
    r = {k: v["mean_rate"] for k, v in rows.items()}
    e = {k: v["ee"] for k, v in rows.items()}
    others = [k for k in r if k not in ("sp_perfsub", "sp_estsub")]
    checks = {
        "perfsub_highest_rate": all(r["sp_perfsub"] > r[k] for k in others),
        "perfsub_highest_ee": all(e["sp_perfsub"] > e[k] for k in others),
        "nosub_above_rp_k": r["sp_nosub"] > r["rp_k"],
        "rp_opt_within_10pct_of_estsub": abs(r["rp_opt"] / r["sp_estsub"] - 1) <= 0.10,
    }
    return Check("orderings_m100", all(checks.values()), {"rates_bps": r, "checks": checks},
                 "see checks", "10% for rp_opt vs sp_estsub",
                 note="perfsub is compared with closed-form schemes only")


CHECKS = {
    "rayleigh_ks": check_rayleigh_ks,
    "lsf_moments": check_lsf_moments,
    "estimate_quality_rp": check_estimate_quality_rp,
    "estimate_quality_sp": check_estimate_quality_sp,
    "mc_rp_table1": check_mc_rp_table1,
    "mc_sp_table1": check_mc_sp_table1,
    "rational_rp": check_rational_rp,
    "sp_tau_c_limit": check_sp_tau_c_limit,
    "lambert": check_lambert,
    "zeta_max": check_zeta_max,
    "zeta_integer": check_zeta_integer,
    "large_m_limit": check_large_m_limit,
    "bound_oracle": check_bound_oracle,
    "bound_unimodal": check_bound_unimodal,
    "jensen": check_jensen,
    "gamma_oracle": check_gamma_oracle,
    "tx_power_sampling": check_tx_power_sampling,
    "neff_variance": check_neff_variance,
    "orderings": check_orderings,
}


def validate_suite(seed: int = 0, only=None, progress=None) -> ValidationReport:
    """Run the checks (all, or the names in ``only``) and collect a report.

    A check that raises is recorded as failed with the exception text.
    """
    rep = ValidationReport()
    for name, fn in CHECKS.items():
        if only and name not in only:
            continue
        t0 = time.time()
        try:
            c = fn(seed)
        except Exception as exc:  # noqa: BLE001 - reported, not swallowed
            c = Check(name, False, f"{type(exc).__name__}: {exc}", "no exception", "")
        c.seconds = round(time.time() - t0, 3)
        rep.checks.append(c)
        if progress:
            progress(c)
    return rep
