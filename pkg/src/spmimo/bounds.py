"""Closed-form lower bounds on LSF-averaged rates under channel inversion.

The bounds average the inverse SINR over PPP deployments and apply Jensen's
inequality, so they depend only on ``M, K, tau_c, tau_p, delta``, the SNR
``rho/sigma2`` and the pathloss exponent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import Scheme, SinrBreakdown, SystemConfig
from .optimizer import optimize_delta, optimize_tau_p

__all__ = ["BoundInputs", "BoundDomainError", "lb_sinr_rp", "lb_sinr_sp", "lb_sinr_sp_ub",
           "lb_rate_rp", "lb_rate_sp", "lb_rate_sp_ub", "lb_rate", "lb_breakdown",
           "best_tau_p", "best_delta"]


class BoundDomainError(ValueError):
    pass


@dataclass(frozen=True)
class BoundInputs:
    M: float
    K: float
    tau_c: float
    tau_p: float
    delta: float
    snr: float
    alpha: float

    def __post_init__(self):
        errs = []
        if not self.alpha > 2:
            errs.append("alpha must exceed 2")
        if not self.snr > 0:
            errs.append("snr must be positive")
        for name in ("M", "K", "tau_c", "tau_p"):
            if not getattr(self, name) > 0:
                errs.append(f"{name} must be positive")
        if errs:
            raise BoundDomainError("; ".join(errs))

    @classmethod
    def from_config(cls, cfg: SystemConfig) -> "BoundInputs":
        return cls(M=cfg.M, K=cfg.K, tau_c=cfg.tau_c, tau_p=cfg.tau_p, delta=cfg.delta,
                   snr=cfg.snr, alpha=cfg.alpha)

    def replace(self, **kw) -> "BoundInputs":
        return replace(self, **kw)


def _check_delta(b: BoundInputs):
    if not 0.0 < b.delta < 1.0:
        raise BoundDomainError("delta must lie in (0, 1)")


def _rp_terms(b: BoundInputs):
    M, K, tp, a = b.M, b.K, b.tau_p, b.alpha
    s2r = 1.0 / b.snr
    coh = M * K / (tp * (a - 1.0))
    nc = K * K / (tp * (a - 1.0)) + (1.0 + (K / tp) * 2.0 / (a - 2.0) + s2r / tp) * (
        a * K / (a - 2.0) + s2r)
    return M, coh, 0.0, nc


def _sp_terms(b: BoundInputs):
    _check_delta(b)
    M, K, tc, d, a = b.M, b.K, b.tau_c, b.delta, b.alpha
    s2r = 1.0 / b.snr
    pc = M * K / (tc * (a - 1.0)) * (1.0 - d / tc)
    ec = M * K / tc * (1.0 - d) * a / (d * (a - 1.0))
    nc = (2.0 * (1.0 - d) / tc * (1.0 + K / (tc * (a - 1.0)))
          + K * (1.0 - d) ** 2 * a / (tc ** 2 * d * (a - 1.0))
          + K * K / (tc * d * (a - 1.0))
          + (1.0 + K / (tc * d) * (2.0 / (a - 2.0) + (1.0 - d)) + s2r / (d * tc))
          * (K * a / (a - 2.0) + s2r))
    return M * (1.0 - d), pc, ec, nc


def _sp_ub_terms(b: BoundInputs):
    # The two non-coherent terms below carry tau_c where the source printing
    # shows tau_p; RP's pilot length plays no role with superimposed pilots.
    _check_delta(b)
    M, K, tc, d, a = b.M, b.K, b.tau_c, b.delta, b.alpha
    s2r = 1.0 / b.snr
    pc = M * K * (1.0 - d) / (tc * (a - 1.0))
    ec = M * K * (1.0 - d) ** 2 * a / (tc * d * (a - 1.0))
    nc = (K * (1.0 - d) ** 2 * a / (tc ** 2 * d * (a - 1.0))
          + K * K * (1.0 - d) / (tc * d * (a - 1.0))
          + (1.0 + K / (tc * d) * (2.0 / (a - 2.0) + (1.0 - d)) + s2r / (d * tc))
          * (K * (1.0 - d) * a / (a - 2.0) + s2r))
    return M * (1.0 - d), pc, ec, nc


_TERMS = {Scheme.RP: _rp_terms, Scheme.SP_NOSUB: _sp_terms, Scheme.SP_PERFSUB: _sp_ub_terms}


def lb_breakdown(scheme, b: BoundInputs) -> SinrBreakdown:
    """Bound SINR split into coherent and non-coherent parts.

    Noise is entangled with the interference moments here, so it is reported
    inside ``non_coherent`` and ``noise_term`` is zero.
    """
    scheme = Scheme.parse(scheme)
    if scheme not in _TERMS:
        raise ValueError(f"no bound for {scheme.value}")
    g, pc, ec, nc = _TERMS[scheme](b)
    return SinrBreakdown(g, pc, ec, nc, 0.0)


def _sinr(scheme, b):
    g, pc, ec, nc = _TERMS[scheme](b)
    return g / (pc + ec + nc)


def lb_sinr_rp(b: BoundInputs) -> float:
    return _sinr(Scheme.RP, b)


def lb_sinr_sp(b: BoundInputs) -> float:
    return _sinr(Scheme.SP_NOSUB, b)


def lb_sinr_sp_ub(b: BoundInputs) -> float:
    return _sinr(Scheme.SP_PERFSUB, b)


def lb_rate_rp(b: BoundInputs) -> float:
    """RP rate bound in bit/s/Hz (``tau_p`` may be real)."""
    if b.tau_p > b.tau_c:
        raise BoundDomainError("tau_p exceeds tau_c")
    return (1.0 - b.tau_p / b.tau_c) * math.log2(1.0 + lb_sinr_rp(b))


def lb_rate_sp(b: BoundInputs) -> float:
    """SP rate bound without pilot subtraction, bit/s/Hz."""
    return math.log2(1.0 + lb_sinr_sp(b))


def lb_rate_sp_ub(b: BoundInputs) -> float:
    """SP rate bound with perfect pilot subtraction, bit/s/Hz."""
    return math.log2(1.0 + lb_sinr_sp_ub(b))


def lb_rate(scheme, b: BoundInputs, bandwidth: float = 1.0) -> float:
    """Bound for ``scheme`` times ``bandwidth`` (pass ``cfg.bandwidth`` for bit/s)."""
    scheme = Scheme.parse(scheme)
    fn = {Scheme.RP: lb_rate_rp, Scheme.SP_NOSUB: lb_rate_sp,
          Scheme.SP_PERFSUB: lb_rate_sp_ub}.get(scheme)
    if fn is None:
        raise ValueError(f"no bound for {scheme.value}")
    return bandwidth * fn(b)


def best_tau_p(b: BoundInputs) -> tuple[int, float]:
    """Integer ``tau_p`` in ``[K, tau_c]`` maximizing the RP bound."""
    return optimize_tau_p(lambda t: lb_rate_rp(b.replace(tau_p=t)), int(b.K), int(b.tau_c))


def best_delta(scheme, b: BoundInputs, grid_step: float = 0.01) -> tuple[float, float]:
    """Power split maximizing the SP bound of ``scheme``."""
    scheme = Scheme.parse(scheme)
    return optimize_delta(lambda d: lb_rate(scheme, b.replace(delta=d)), grid_step)
