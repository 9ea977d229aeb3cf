"""Energy efficiency: area sum rate over area power consumption."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .core import PowerModel, Scheme, SystemConfig, validate_power_model

__all__ = ["PowerBreakdown", "EEResult", "avg_tx_power", "lp_ce_power", "ee", "gamma_fn"]


def gamma_fn(x: float) -> float:
    """Gamma function for positive ``x`` through log-Gamma."""
    if x <= 0:
        raise ValueError("gamma_fn expects x > 0")
    return math.exp(math.lgamma(x))


def avg_tx_power(cfg: SystemConfig, pm: PowerModel | None = None) -> float:
    """Average UE transmit power per cell in W under channel inversion.

    ``(B_w/eta) K rho omega E{d^alpha}`` with the nearest-BS distance moment
    ``E{d^alpha} = Gamma(alpha/2 + 1) / (pi D)^(alpha/2)``.
    """
    pm = pm or PowerModel()
    if cfg.alpha <= -2:
        raise ValueError("alpha must exceed -2")
    moment = math.exp(math.lgamma(cfg.alpha / 2.0 + 1.0)
                      - (cfg.alpha / 2.0) * math.log(math.pi * cfg.density))
    return cfg.bandwidth / pm.eta * cfg.K * cfg.rho * cfg.omega * moment


def lp_ce_power(scheme, cfg: SystemConfig, pm: PowerModel) -> float:
    """Linear processing plus channel estimation power; doubled with SP."""
    base = cfg.bandwidth * cfg.M * cfg.K / pm.flops_per_watt
    return 2.0 * base if Scheme.parse(scheme).is_sp else base


@dataclass(frozen=True)
class PowerBreakdown:
    p_tx: float
    p_fixed: float
    p_ue_chains: float
    p_bs_chains: float
    p_lp_ce: float
    p_rate_dep: float
    total: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EEResult:
    ee: float
    """bit/Joule"""
    power: PowerBreakdown
    avg_rate_bps: float
    source: str


def ee(scheme, avg_rate_bps: float, cfg: SystemConfig, pm: PowerModel,
       source: str = "unspecified") -> EEResult:
    """Energy efficiency for an average per-UE rate.

    Parameters
    ----------
    avg_rate_bps : float
        Average rate per UE in bit/s (a bound or a Monte Carlo average).
    source : str
        Provenance of ``avg_rate_bps``, e.g. ``"bound"`` or ``"mc"``; recorded.
    """
    if not avg_rate_bps >= 0:
        raise ValueError("average rate must be nonnegative")
    errs = validate_power_model(pm)
    if errs:
        raise ValueError("; ".join(errs))
    parts = dict(
        p_tx=avg_tx_power(cfg, pm),
        p_fixed=pm.c0,
        p_ue_chains=pm.c1 * cfg.K,
        p_bs_chains=pm.d0 * cfg.M,
        p_lp_ce=lp_ce_power(scheme, cfg, pm),
        p_rate_dep=pm.a_rate * avg_rate_bps * cfg.K,
    )
    total = math.fsum(parts.values())
    pb = PowerBreakdown(**parts, total=total)
    return EEResult(cfg.K * avg_rate_bps / total, pb, avg_rate_bps, source)
