"""Large-array limits and the optimal RP pilot fraction."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .closed_form import LsfSnapshot, _snapshot_agg, _typical
from .core import Scheme, SystemConfig

__all__ = ["lambert_w0", "zeta_max", "rp_limit_rate", "AsymptoticResult", "rate_limit",
           "limit_sinr", "sir_rp", "d2_rp_limit_rate"]

_INV_E = math.exp(-1.0)
_TOL = 1e-15
_MAX_ITER = 100


def _w0_guess(z: float) -> float:
    if z < -0.25:
        # branch-point series in p = sqrt(2(ez + 1))
        p = math.sqrt(max(2.0 * (math.e * z + 1.0), 0.0))
        return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    if z < 3.0:
        return math.log1p(z) if z > -0.25 else z - z * z
    l1 = math.log(z)
    l2 = math.log(l1)
    return l1 - l2 + l2 / l1


def _w0_scalar(z: float) -> float:
    if math.isnan(z):
        return math.nan
    if z < -_INV_E:
        if z > -_INV_E - 1e-16:
            return -1.0
        raise ValueError(f"lambert_w0 undefined for z < -1/e (got {z!r})")
    if z == 0.0:
        return 0.0
    if math.isinf(z):
        return math.inf
    w = _w0_guess(z)
    for _ in range(_MAX_ITER):
        ew = math.exp(w)
        f = w * ew - z
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        if denom == 0.0:
            break
        step = f / denom
        w_new = w - step
        if abs(step) <= _TOL * (1.0 + abs(w_new)):
            w = w_new
            break
        w = w_new
    return w


def lambert_w0(z):
    """Principal branch of the Lambert W function, ``W(z) exp(W(z)) = z``.

    Halley iteration from a branch-point series (``z`` near ``-1/e``), a
    small-argument guess, or the log-log asymptote for large ``z``.

    Parameters
    ----------
    z : float or array_like
        Must satisfy ``z >= -1/e``.

    Raises
    ------
    ValueError
        If any ``z < -1/e``.
    """
    if np.ndim(z) == 0:
        return _w0_scalar(float(z))
    arr = np.asarray(z, dtype=float)
    return np.vectorize(_w0_scalar, otypes=[float])(arr)


def zeta_max(sir_rp):
    """Pilot fraction maximizing ``(1 - zeta) log2(1 + zeta * SIR)``.

    ``(1/S)((1+S)/W((1+S)e) - 1)``; tends to 1/2 as ``S -> 0`` and to 0 as
    ``S -> inf``.
    """
    def one(s):
        s = float(s)
        if not s > 0:
            raise ValueError("SIR must be positive")
        if math.isinf(s):
            return 0.0
        if s < 1e-4:
            # series avoids the cancellation in (1+S)/W - 1
            return 0.5 + s * (-1.0 / 16.0 + s * (5.0 / 192.0 - s * 43.0 / 3072.0))
        return ((1.0 + s) / _w0_scalar((1.0 + s) * math.e) - 1.0) / s
    if np.ndim(sir_rp) == 0:
        return one(sir_rp)
    return np.vectorize(one, otypes=[float])(np.asarray(sir_rp, dtype=float))


def rp_limit_rate(zeta, sir):
    """Large-array RP spectral efficiency ``(1 - zeta) log2(1 + zeta SIR)``."""
    zeta = np.asarray(zeta, dtype=float)
    return (1.0 - zeta) * np.log2(1.0 + zeta * sir)


def d2_rp_limit_rate(zeta, sir):
    """Second derivative of :func:`rp_limit_rate` in ``zeta``."""
    zeta = np.asarray(zeta, dtype=float)
    u = 1.0 + zeta * sir
    return -(sir / math.log(2.0)) * (2.0 / u + (1.0 - zeta) * sir / u ** 2)


@dataclass(frozen=True)
class AsymptoticResult:
    """``rate_limit_bps`` is ``inf`` and ``unbounded`` is set when nothing
    limits the SINR as the array grows (no coherent interference)."""

    rate_limit_bps: float
    sir: float
    zeta_max: float
    limit_sinr: float
    scheme: Scheme
    unbounded: bool = False


def _limit_parts(scheme, snap: LsfSnapshot, cfg: SystemConfig):
    agg = _snapshot_agg(snap)
    P0, Q0, B0 = _typical(snap)
    qb0 = Q0 * B0
    b_pq_psi, b_qq_psi, b_pp, b_pq = agg[3], agg[4], agg[5], agg[6]
    tc = cfg.tau_c
    if scheme is Scheme.RP:
        coh = b_pq_psi / (cfg.tau_p * qb0)
    elif scheme is Scheme.SP_NOSUB:
        coh = (b_pq_psi + (1.0 - 1.0 / tc) * b_qq_psi + b_pq + b_pp) / (tc * qb0)
    elif scheme is Scheme.SP_PERFSUB:
        coh = (b_pq_psi + b_pp) / (tc * qb0)
    else:
        raise ValueError("no closed-form limit for estimated pilot subtraction")
    sir = P0 * B0 / (b_pq_psi / (tc * qb0)) if b_pq_psi > 0 else math.inf
    return P0 * B0, coh, sir


def sir_rp(snap: LsfSnapshot, cfg: SystemConfig) -> float:
    """Pilot-contamination SIR normalized by ``tau_c`` (``inf`` without interferers)."""
    return _limit_parts(Scheme.RP, snap, cfg)[2]


def limit_sinr(scheme, snap: LsfSnapshot, cfg: SystemConfig) -> float:
    scheme = Scheme.parse(scheme)
    gain, coh, _ = _limit_parts(scheme, snap, cfg)
    return gain / coh if coh > 0 else math.inf


def rate_limit(scheme, snap: LsfSnapshot, cfg: SystemConfig) -> AsymptoticResult:
    """Rate of the typical UE as ``M -> inf`` for the snapshot's powers."""
    scheme = Scheme.parse(scheme)
    if scheme.is_sp and not 0.0 < cfg.delta < 1.0:
        raise ValueError("delta must lie in (0, 1) for superimposed pilots")
    s_lim = limit_sinr(scheme, snap, cfg)
    s_rp = sir_rp(snap, cfg)
    zmax = zeta_max(s_rp)
    prelog = 1.0 - cfg.tau_p / cfg.tau_c if scheme is Scheme.RP else 1.0
    if math.isinf(s_lim):
        return AsymptoticResult(math.inf if prelog > 0 else 0.0, s_rp, zmax, math.inf, scheme,
                                unbounded=prelog > 0)
    r = cfg.bandwidth * prelog * math.log2(1.0 + s_lim)
    return AsymptoticResult(r, s_rp, zmax, s_lim, scheme)
