"""Closed-form effective SINRs and ergodic rates.

Regular pilots (RP) use MRC with an MMSE estimate from ``tau_p`` orthogonal
pilot samples. Superimposed pilots (SP) spread pilot and data over all
``tau_c`` samples; ``sinr_sp_ub`` assumes the received pilot symbols are
removed perfectly before detection and upper-bounds any subtraction scheme.

All expressions are written from the primitives ``beta``, ``p`` and ``q`` so
that arbitrary power control can be evaluated; :meth:`LsfSnapshot.from_network`
applies statistical channel inversion (``p = rho_d / beta_serving``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import RateResult, Scheme, SinrBreakdown, SystemConfig
from .kernels import interference_aggregates

__all__ = [
    "LsfSnapshot",
    "DegenerateConfigError",
    "channel_inversion_powers",
    "gamma_rp",
    "gamma_sp",
    "sinr_rp",
    "sinr_sp",
    "sinr_sp_ub",
    "sinr",
    "rate",
    "var_neff_sp",
    "sinr_terms",
    "network_unit_aggregates",
    "scale_unit_aggregates",
    "network_sinr",
    "network_rates",
    "SinrTerms",
]


class DegenerateConfigError(ValueError):
    """The requested SINR is undefined or trivially zero for this power split."""


@dataclass(frozen=True)
class LsfSnapshot:
    """Large-scale fading seen from one typical BS and one typical UE.

    Attributes
    ----------
    beta_serving : ndarray, shape (n, K)
        Gain from UE ``(l', i)`` to its own BS ``l'``.
    beta_cross : ndarray, shape (n, K)
        Gain from UE ``(l', i)`` to the typical BS ``cell``.
    p, q : ndarray, shape (n, K)
        Data and pilot powers per symbol.
    cell, k : int
        Typical BS index and typical UE index within it.
    """

    beta_serving: np.ndarray
    beta_cross: np.ndarray
    p: np.ndarray
    q: np.ndarray
    cell: int = 0
    k: int = 0

    def __post_init__(self):
        for name in ("beta_serving", "beta_cross", "p", "q"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 2:
                raise ValueError(f"{name} must be 2-D (cells x users)")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        shapes = {getattr(self, n).shape for n in ("beta_serving", "beta_cross", "p", "q")}
        if len(shapes) != 1:
            raise ValueError("snapshot arrays must share one shape")
        n, K = self.beta_cross.shape
        if not (0 <= self.cell < n and 0 <= self.k < K):
            raise ValueError("typical UE index out of range")
        if np.any(self.beta_cross <= 0) or np.any(self.beta_serving <= 0):
            raise ValueError("gains must be positive")
        if np.any(self.p < 0) or np.any(self.q < 0):
            raise ValueError("powers must be nonnegative")
        if not np.allclose(self.beta_cross[self.cell], self.beta_serving[self.cell], rtol=1e-12):
            raise ValueError("own-cell cross gains must equal serving gains")

    @property
    def n_cells(self) -> int:
        return self.beta_cross.shape[0]

    @property
    def K(self) -> int:
        return self.beta_cross.shape[1]

    @classmethod
    def from_network(cls, net, cfg: SystemConfig, scheme=Scheme.RP, cell: int = 0,
                     k: int = 0) -> "LsfSnapshot":
        """Snapshot of ``net`` seen from BS ``cell`` under channel inversion."""
        rho_d, rho_p = cfg.powers(scheme)
        bs = net.serving_beta()
        p, q = channel_inversion_powers(bs, rho_d, rho_p)
        return cls(beta_serving=bs, beta_cross=net.beta[cell], p=p, q=q, cell=cell, k=k)

    def with_powers(self, cfg: SystemConfig, scheme) -> "LsfSnapshot":
        rho_d, rho_p = cfg.powers(scheme)
        p, q = channel_inversion_powers(self.beta_serving, rho_d, rho_p)
        return LsfSnapshot(self.beta_serving, self.beta_cross, p, q, self.cell, self.k)


def channel_inversion_powers(beta_serving, rho_d: float, rho_p: float):
    """Per-UE powers ``(p, q) = (rho_d, rho_p) / beta_serving``."""
    bs = np.asarray(beta_serving, dtype=float)
    return rho_d / bs, rho_p / bs


# ------------------------------------------------------------ shared algebra

@dataclass(frozen=True)
class SinrTerms:
    """Array-valued SINR components (broadcast over typical UEs)."""

    coherent_gain: np.ndarray
    pilot_contamination: np.ndarray
    extra_coherent: np.ndarray
    non_coherent: np.ndarray
    noise_term: np.ndarray

    @property
    def sinr(self) -> np.ndarray:
        den = self.pilot_contamination + self.extra_coherent + self.non_coherent + self.noise_term
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(den > 0, self.coherent_gain / np.where(den > 0, den, 1.0), np.inf)

    def breakdown(self, index=()) -> SinrBreakdown:
        return SinrBreakdown(*(float(np.asarray(getattr(self, f))[index]) for f in (
            "coherent_gain", "pilot_contamination", "extra_coherent", "non_coherent",
            "noise_term")))


def _gammas(agg, P0, Q0, B0, tau_p, tau_c, sigma2):
    a_pb, a_qb_psi = agg[..., 0], agg[..., 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        g_rp = Q0 * tau_p * B0 / (Q0 * tau_p * B0 + a_qb_psi + sigma2)
        g_sp = Q0 * tau_c * B0 / (Q0 * tau_c * B0 + a_qb_psi + a_pb + sigma2)
    return g_rp, g_sp


def sinr_terms(scheme, agg, P0, Q0, B0, M, tau_p, tau_c, sigma2) -> SinrTerms:
    """Evaluate SINR components from interference aggregates.

    ``agg`` has trailing dimension 7 (see :func:`spmimo.kernels.interference_aggregates`)
    and broadcasts against the typical-UE arrays ``P0, Q0, B0``.
    """
    scheme = Scheme.parse(scheme)
    agg = np.asarray(agg, dtype=float)
    a_pb, a_qb_psi, a_qb = agg[..., 0], agg[..., 1], agg[..., 2]
    b_pq_psi, b_qq_psi, b_pp, b_pq = agg[..., 3], agg[..., 4], agg[..., 5], agg[..., 6]
    P0, Q0, B0 = (np.asarray(x, dtype=float) for x in (P0, Q0, B0))
    g_rp, g_sp = _gammas(agg, P0, Q0, B0, tau_p, tau_c, sigma2)
    gain = M * P0 * B0
    qb0 = Q0 * B0
    zero = np.zeros(np.broadcast(gain, a_pb).shape)
    if scheme is Scheme.RP:
        return SinrTerms(gain + zero, (M / tau_p) * b_pq_psi / qb0 + zero, zero,
                         a_pb / g_rp + zero, sigma2 / g_rp + zero)
    if scheme is Scheme.SP_PERFSUB:
        return SinrTerms(gain + zero,
                         (M / tau_c) * b_pq_psi / qb0 + zero,
                         (M / tau_c) * b_pp / qb0 + zero,
                         b_pp / (tau_c ** 2 * qb0) + a_pb / g_sp + zero,
                         sigma2 / g_sp + zero)
    if scheme is Scheme.SP_NOSUB:
        return SinrTerms(gain + zero,
                         (M / tau_c) * (b_pq_psi + (1.0 - 1.0 / tau_c) * b_qq_psi) / qb0 + zero,
                         (M / tau_c) * (b_pq + b_pp) / qb0 + zero,
                         (2.0 / tau_c) * P0 * B0 + (2.0 * b_pq_psi + b_pp) / (tau_c ** 2 * qb0)
                         + (a_qb + a_pb) / g_sp + zero,
                         sigma2 / g_sp + zero)
    raise ValueError("no closed form exists for estimated pilot subtraction")


def _snapshot_agg(snap: LsfSnapshot) -> np.ndarray:
    return interference_aggregates(snap.beta_cross[None], snap.p, snap.q,
                                   np.array([snap.cell]))[0]


def _typical(snap: LsfSnapshot):
    c, k = snap.cell, snap.k
    return snap.p[c, k], snap.q[c, k], snap.beta_cross[c, k]


def _check_sp_split(cfg: SystemConfig, snap: LsfSnapshot, need_data: bool):
    P0, Q0, _ = _typical(snap)
    if Q0 <= 0 or cfg.delta <= 0:
        raise DegenerateConfigError("no pilot power: estimator undefined")
    if need_data and (P0 <= 0 or cfg.delta >= 1):
        raise DegenerateConfigError("no data power: SINR numerator is zero (rate 0)")


# ------------------------------------------------------- snapshot interface

def gamma_rp(snap: LsfSnapshot, cfg: SystemConfig) -> float:
    """Average RP estimation quality of the typical UE."""
    P0, Q0, B0 = _typical(snap)
    return float(_gammas(_snapshot_agg(snap), P0, Q0, B0, cfg.tau_p, cfg.tau_c, cfg.sigma2)[0])


def gamma_sp(snap: LsfSnapshot, cfg: SystemConfig) -> float:
    """Average SP estimation quality of the typical UE."""
    P0, Q0, B0 = _typical(snap)
    if Q0 <= 0:
        raise DegenerateConfigError("no pilot power: estimator undefined")
    return float(_gammas(_snapshot_agg(snap), P0, Q0, B0, cfg.tau_p, cfg.tau_c, cfg.sigma2)[1])


def _breakdown(scheme, snap, cfg) -> SinrBreakdown:
    P0, Q0, B0 = _typical(snap)
    t = sinr_terms(scheme, _snapshot_agg(snap), P0, Q0, B0, cfg.M, cfg.tau_p, cfg.tau_c,
                   cfg.sigma2)
    return t.breakdown()


def sinr_rp(snap: LsfSnapshot, cfg: SystemConfig) -> SinrBreakdown:
    """Effective SINR with regular pilots and MRC."""
    _, Q0, _ = _typical(snap)
    if Q0 <= 0:
        raise DegenerateConfigError("no pilot power: estimator undefined")
    return _breakdown(Scheme.RP, snap, cfg)


def sinr_sp(snap: LsfSnapshot, cfg: SystemConfig) -> SinrBreakdown:
    """Effective SINR with superimposed pilots, no pilot subtraction."""
    _check_sp_split(cfg, snap, need_data=True)
    return _breakdown(Scheme.SP_NOSUB, snap, cfg)


def sinr_sp_ub(snap: LsfSnapshot, cfg: SystemConfig) -> SinrBreakdown:
    """Effective SINR with superimposed pilots removed perfectly (an upper bound)."""
    _check_sp_split(cfg, snap, need_data=True)
    return _breakdown(Scheme.SP_PERFSUB, snap, cfg)


def sinr(scheme, snap: LsfSnapshot, cfg: SystemConfig) -> SinrBreakdown:
    scheme = Scheme.parse(scheme)
    fn = {Scheme.RP: sinr_rp, Scheme.SP_NOSUB: sinr_sp, Scheme.SP_PERFSUB: sinr_sp_ub}.get(scheme)
    if fn is None:
        raise ValueError("no closed form exists for estimated pilot subtraction")
    return fn(snap, cfg)


def rate(scheme, snap: LsfSnapshot, cfg: SystemConfig) -> RateResult:
    """Ergodic achievable rate in bit/s.

    RP carries the pre-log ``1 - tau_p/tau_c``; SP has none.
    """
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.RP and cfg.tau_p >= cfg.tau_c:
        return RateResult(0.0, 0.0, sinr_rp(snap, cfg), scheme)
    return RateResult.from_sinr(scheme, sinr(scheme, snap, cfg), cfg)


def var_neff_sp(snap: LsfSnapshot, cfg: SystemConfig) -> float:
    """Variance of the effective noise of the SP data estimate (no subtraction).

    Normalized like the SINR numerator ``M p beta``; it equals the SP SINR
    denominator minus ``p beta`` of the typical UE.
    """
    b = sinr_sp(snap, cfg)
    P0, _, B0 = _typical(snap)
    return b.denominator - P0 * B0


# ------------------------------------------------------ whole-network batch

def network_unit_aggregates(net) -> np.ndarray:
    """Aggregates for every BS as typical BS with ``p = q = 1/beta_serving``.

    Under channel inversion every column scales with a fixed monomial in
    ``(rho_d, rho_p)``, so one pass serves all power splits; see
    :func:`scale_unit_aggregates`.
    """
    inv = 1.0 / net.serving_beta()
    return interference_aggregates(net.beta, inv, inv, np.arange(net.n_bs))


def scale_unit_aggregates(unit, rho_d: float, rho_p: float) -> np.ndarray:
    w = np.array([rho_d, rho_p, rho_p, rho_d * rho_p, rho_p * rho_p, rho_d * rho_d,
                  rho_d * rho_p])
    return np.asarray(unit) * w


def network_sinr(net, cfg: SystemConfig, scheme, *, unit_agg=None, tau_p=None, delta=None,
                 M=None) -> SinrTerms:
    """SINR components of every UE of ``net`` as the typical UE (shape (n, K)).

    Powers follow channel inversion. ``tau_p``, ``delta`` and ``M`` override
    the config values; ``unit_agg`` from :func:`network_unit_aggregates` may be
    passed to skip the O(n^2 K) aggregation.
    """
    scheme = Scheme.parse(scheme)
    cfg = cfg.replace(**{k: v for k, v in (("tau_p", tau_p), ("delta", delta), ("M", M))
                         if v is not None})
    if scheme.is_sp and not 0.0 < cfg.delta < 1.0:
        raise DegenerateConfigError("delta must lie in (0, 1) for superimposed pilots")
    rho_d, rho_p = cfg.powers(scheme)
    bs = net.serving_beta()
    p, q = channel_inversion_powers(bs, rho_d, rho_p)
    if unit_agg is None:
        unit_agg = network_unit_aggregates(net)
    agg = scale_unit_aggregates(unit_agg, rho_d, rho_p)
    return sinr_terms(scheme, agg[:, None, :], p, q, bs, cfg.M, cfg.tau_p, cfg.tau_c,
                      cfg.sigma2)


def network_rates(net, cfg: SystemConfig, scheme, **kw) -> np.ndarray:
    """Per-UE rates in bit/s/Hz, shape (n, K)."""
    scheme = Scheme.parse(scheme)
    tau_p = kw.get("tau_p") or cfg.tau_p
    s = network_sinr(net, cfg, scheme, **kw).sinr
    prelog = 1.0 - tau_p / cfg.tau_c if scheme is Scheme.RP else 1.0
    return prelog * np.log2(1.0 + s)
