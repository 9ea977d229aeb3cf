"""Batched Monte Carlo over small-scale fading and pilot allocation.

The engine estimates every expectation in the effective-SINR definitions from
explicit channel, data and noise draws at the typical BS:

* Regular pilots: ``SINR = p|E g_0|^2 / (sum_u p_u E|g_u|^2 - p|E g_0|^2 + E|v^H n|^2)``
  with ``g_u = v^H h_u``.
* Superimposed pilots: the data estimate at sample ``j`` is split into the
  desired term ``sqrt(p/(M beta)) ||h||^2 s_j`` and the effective noise
  ``n_eff``; ``SINR = c (E||h||^2)^2 / (c Var||h||^2 + Var(n_eff))`` with
  ``c = p/(M beta)``.

Both use the detector ``v = z / sqrt(q tau M beta)`` built from the despread
pilot statistic ``z``.

For superimposed pilots the data estimate is linear in ``a = sqrt(delta)``
and ``b = sqrt(1 - delta)`` once the draws are fixed, so per-draw feature
vectors are computed once and any power split is evaluated from them in
``O(tau log tau)``. This gives common random numbers across ``delta``, which
keeps per-deployment optimization of ``delta`` smooth.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import rng as _rng
from ..closed_form import LsfSnapshot
from ..core import Scheme, SinrBreakdown, SystemConfig, config_hash
from ..kernels import rp_draw_stats, sp_residual_stats
from .pilots import draw_assignments
from .stats import batch_jackknife

__all__ = ["MIN_FADING", "LinkSet", "McEstimate", "SpFeatures", "empirical_sinr",
           "empirical_sinr_snapshot", "simulate_rp", "sp_features", "evaluate_sp",
           "neff_variance"]

MIN_FADING = 100
_STREAM = {Scheme.RP: 1, Scheme.SP_NOSUB: 2, Scheme.SP_ESTSUB: 2, Scheme.SP_PERFSUB: 2}


def _cn(gen, shape):
    return (gen.standard_normal(shape) + 1j * gen.standard_normal(shape)) * math.sqrt(0.5)


@dataclass(frozen=True)
class LinkSet:
    """Flattened view of all UEs as seen by the typical BS.

    For superimposed pilots ``aq**2`` and ``ad**2`` are the pilot and data
    powers per unit of ``delta`` and ``1 - delta`` respectively, so that
    ``q = delta aq^2`` and ``p = (1 - delta) ad^2``. For regular pilots they
    are the powers themselves.
    """

    beta: np.ndarray
    aq: np.ndarray
    ad: np.ndarray
    n: int
    K: int
    typ: np.ndarray
    sigma2: float

    @property
    def N(self) -> int:
        return self.n * self.K

    @classmethod
    def from_snapshot(cls, snap: LsfSnapshot, cfg: SystemConfig, scheme, ks=None) -> "LinkSet":
        scheme = Scheme.parse(scheme)
        n, K = snap.beta_cross.shape
        p, q = snap.p.reshape(-1), snap.q.reshape(-1)
        if scheme.is_sp:
            if not 0.0 < cfg.delta < 1.0:
                raise ValueError("delta must lie in (0, 1) for superimposed pilots")
            q, p = q / cfg.delta, p / (1.0 - cfg.delta)
        ks = range(K) if ks is None else ks
        typ = np.array([snap.cell * K + k for k in ks], dtype=np.int64)
        return cls(snap.beta_cross.reshape(-1).copy(), np.sqrt(q), np.sqrt(p), n, K, typ,
                   float(cfg.sigma2))


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo SINR estimates for the typical UEs of one deployment."""

    scheme: Scheme
    ks: tuple
    breakdowns: tuple
    sinr_se: np.ndarray
    dof: int
    n_fading: int
    seed: int
    config_hash: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def sinr(self) -> np.ndarray:
        return np.array([b.sinr for b in self.breakdowns])

    def breakdown(self, i: int = 0) -> SinrBreakdown:
        return self.breakdowns[i]

    def ci_half(self, level: float = 0.95, n_tests: int = 1) -> np.ndarray:
        from .stats import t_quantile
        return t_quantile(level, self.dof, n_tests) * self.sinr_se

    def rates(self, prelog: float = 1.0) -> np.ndarray:
        """Spectral efficiency per typical UE, bit/s/Hz."""
        return prelog * np.log2(1.0 + self.sinr)

    def summary(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "n_fading": self.n_fading,
            "ues": list(self.ks),
            "sinr": [float(x) for x in self.sinr],
            "ci_half_95": [float(x) for x in self.ci_half()],
            "breakdown": [b.to_dict() for b in self.breakdowns],
            **self.extra,
        }


def _batches(n_fading: int, batch_size: int):
    edges = list(range(0, n_fading, batch_size)) + [n_fading]
    return [(i, b - a) for i, (a, b) in enumerate(zip(edges[:-1], edges[1:]))]


def _run_batches(fn, n_fading, batch_size, threads):
    jobs = _batches(n_fading, batch_size)
    if threads <= 1 or len(jobs) == 1:
        return [fn(i, size) for i, size in jobs]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda j: fn(*j), jobs))


# --------------------------------------------------------------------- RP

def _rp_batch(links: LinkSet, M: int, tau_p: int, seed: int, stream: tuple, bi: int, B: int):
    gen = _rng.substream(seed, _rng.FADING, *stream, bi)
    group = draw_assignments(gen, B, links.n, links.K, tau_p).reshape(B, links.N)
    H = _cn(gen, (B, links.N, M)) * np.sqrt(links.beta)[None, :, None]
    sig = math.sqrt(links.sigma2)
    # typical UEs of one cell use distinct pilots, so their despread noises are independent
    nbar = _cn(gen, (B, links.typ.size, M)) * sig
    n = _cn(gen, (B, M)) * sig
    return rp_draw_stats(H, group, nbar, n, links.aq, links.ad, tau_p,
                         links.beta[links.typ], links.typ)


def simulate_rp(links: LinkSet, M: int, tau_p: int, n_fading: int, seed: int, *,
                stream=(0,), batch_size: int = 256, threads: int = 1) -> np.ndarray:
    """Per-draw RP statistics, shape (n_fading, T, 4); see :func:`spmimo.kernels.rp_draw_stats`."""
    parts = _run_batches(lambda i, b: _rp_batch(links, M, tau_p, seed, tuple(stream), i, b),
                         n_fading, batch_size, threads)
    return np.concatenate(parts, axis=0)


def _rp_estimate(stats: np.ndarray, p_t: np.ndarray, n_batches: int):
    def fn(m):
        g2 = m[:, 0] ** 2 + m[:, 1] ** 2
        gain = p_t * g2
        interf = m[:, 2] - gain
        return np.stack([gain, interf, m[:, 3], gain / (interf + m[:, 3])], axis=-1)
    return batch_jackknife(stats, fn, n_batches)


# --------------------------------------------------------------------- SP

_FEATURES = ("PhiP", "PhiD", "PhiN", "SP", "NP", "SD", "X", "NN")


@dataclass
class SpFeatures:
    """Per-draw feature vectors of the SP data estimate for the typical UEs.

    ``parts[name]`` has shape (n, T, tau) and already includes the detector
    scaling. With ``a = sqrt(delta)``, ``b = sqrt(1 - delta)`` the data estimate is::

        y = a PhiP + b PhiD + PhiN                      (received pilot part)
          + b SP + NP + (b^2/a) SD + (b/a) X + (1/a) NN

    and the desired term is ``b self_amp h2 s``.
    """

    parts: dict
    s_t: np.ndarray
    h2: np.ndarray
    phase: np.ndarray
    gq: np.ndarray
    gd: np.ndarray
    self_amp: np.ndarray
    c_unit: np.ndarray
    sigma2: float
    tau: int

    @property
    def n(self) -> int:
        return self.h2.shape[0]

    def subset(self, sl) -> "SpFeatures":
        return SpFeatures({k: v[sl] for k, v in self.parts.items()}, self.s_t[sl], self.h2[sl],
                          self.phase[sl], self.gq[sl], self.gd[sl], self.self_amp, self.c_unit,
                          self.sigma2, self.tau)

    @staticmethod
    def concat(items) -> "SpFeatures":
        f0 = items[0]
        cat = lambda xs: np.concatenate(xs, axis=0)  # noqa: E731
        return SpFeatures({k: cat([f.parts[k] for f in items]) for k in _FEATURES},
                          cat([f.s_t for f in items]), cat([f.h2 for f in items]),
                          cat([f.phase for f in items]), cat([f.gq for f in items]),
                          cat([f.gd for f in items]), f0.self_amp, f0.c_unit, f0.sigma2, f0.tau)


def _sp_batch(links: LinkSet, M: int, tau: int, seed: int, stream: tuple, bi: int, B: int,
              floor: float | None):
    gen = _rng.substream(seed, _rng.FADING, *stream, bi)
    group, H, S, Nz = _sp_draws(gen, links, M, tau, B)
    return sp_features_from_draws(links, M, tau, group, H, S, Nz, floor)


def _sp_draws(gen, links: LinkSet, M: int, tau: int, B: int):
    N = links.N
    group = draw_assignments(gen, B, links.n, links.K, tau).reshape(B, N)
    H = _cn(gen, (B, N, M)) * np.sqrt(links.beta)[None, :, None]
    S = _cn(gen, (B, N, tau))
    Nz = _cn(gen, (B, M, tau)) * math.sqrt(links.sigma2)
    return group, H, S, Nz


def sp_features_from_draws(links: LinkSet, M: int, tau: int, group, H, S, Nz,
                           floor: float | None = None) -> SpFeatures:
    """Features for explicit draws: pilot indices (B, N), channels (B, N, M),
    data (B, N, tau) and noise (B, M, tau)."""
    B = H.shape[0]
    N, T, typ = links.N, links.typ.size, links.typ
    rt = math.sqrt(tau)
    gt = group[:, typ]                                               # (B, T)
    same = (group[:, None, :] == gt[:, :, None]).astype(float)       # (B, T, N)
    # s_u . phi_p^* = tau * ifft(s_u)[p]
    Sf = tau * np.fft.ifft(S, axis=-1)
    cd = np.take_along_axis(Sf, np.broadcast_to(gt[:, None, :], (B, N, T)), axis=-1)
    cd = np.swapaxes(cd, 1, 2)                                       # (B, T, N)
    Nf = tau * np.fft.ifft(Nz, axis=-1)
    zN = np.take_along_axis(Nf, np.broadcast_to(gt[:, None, :], (B, M, T)), axis=-1) / rt
    zP = rt * (same * links.aq) @ H
    zD = (cd * links.ad) / rt @ H
    Z = np.concatenate([zP, zD, np.swapaxes(zN, 1, 2)], axis=1)     # (B, 3T, M)
    Zc = Z.conj()
    G = Zc @ np.swapaxes(H, 1, 2)                                    # (B, 3T, N)
    onehot = np.zeros((B, N, tau))
    np.put_along_axis(onehot, group[:, :, None], 1.0, axis=-1)
    Phi = np.fft.fft((G * links.aq) @ onehot, axis=-1)               # sum_u g_u aq_u phi_u
    Sx = (G * links.ad) @ S
    Nx = Zc @ Nz
    bt = links.beta[typ]
    kappa = (1.0 / (links.aq[typ] * np.sqrt(tau * M * bt)))[None, :, None]
    P, D, Nn = slice(0, T), slice(T, 2 * T), slice(2 * T, 3 * T)
    parts = {
        "PhiP": kappa * Phi[:, P], "PhiD": kappa * Phi[:, D], "PhiN": kappa * Phi[:, Nn],
        "SP": kappa * Sx[:, P], "NP": kappa * Nx[:, P], "SD": kappa * Sx[:, D],
        "X": kappa * (Nx[:, D] + Sx[:, Nn]), "NN": kappa * Nx[:, Nn],
    }
    h2 = np.sum(np.abs(H[:, typ]) ** 2, axis=-1)
    jj = np.arange(tau)
    phase = np.exp(2j * np.pi * gt[:, :, None] * jj / tau)           # conj of typical pilot
    w = links.aq ** 2 * links.beta
    if floor is not None:
        w = np.where(links.beta >= floor, w, 0.0)
    gq = np.einsum("bnp,n->bp", onehot, w)
    gd = np.full(B, float(np.sum(links.ad ** 2 * links.beta)))
    return SpFeatures(parts, S[:, typ], h2, phase, gq, gd,
                      links.ad[typ] / np.sqrt(M * bt), links.ad[typ] ** 2 / (M * bt),
                      links.sigma2, tau)


def sp_features(links: LinkSet, M: int, tau_c: int, n_fading: int, seed: int, *, stream=(0,),
                batch_size: int | None = None, threads: int = 1,
                subtraction_floor: float | None = None) -> SpFeatures:
    """Draw ``n_fading`` coherence blocks and return their SP features."""
    if batch_size is None:
        per_draw = links.N * tau_c * 16 * 6 + links.N * M * 16 * 2
        batch_size = int(max(1, min(256, 64e6 // per_draw)))
    parts = _run_batches(
        lambda i, b: _sp_batch(links, M, tau_c, seed, tuple(stream), i, b, subtraction_floor),
        n_fading, batch_size, threads)
    return SpFeatures.concat(parts)


def evaluate_sp(feat: SpFeatures, delta: float, scheme) -> np.ndarray:
    """Per-draw SP statistics at power split ``delta``.

    Returns shape (n, T, 5): ``[||h||^2, ||h||^4, Re mean(w), Im mean(w), mean |w|^2]``
    where ``w_j`` is the effective noise rotated by the conjugate typical pilot.
    """
    scheme = Scheme.parse(scheme)
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    a, b = math.sqrt(delta), math.sqrt(1.0 - delta)
    P = feat.parts
    y = b * P["SP"] + P["NP"] + (b * b / a) * P["SD"] + (b / a) * P["X"] + (1.0 / a) * P["NN"]
    if scheme is not Scheme.SP_PERFSUB:
        y = y + a * P["PhiP"] + b * P["PhiD"] + P["PhiN"]
    if scheme is Scheme.SP_ESTSUB:
        tp = delta * feat.tau * feat.gq                                # (n, tau)
        gamma = tp / (tp + (b * b) * feat.gd[:, None] + feat.sigma2)
        y = y - np.fft.fft(gamma[:, None, :] * np.fft.ifft(y, axis=-1), axis=-1)
    elif scheme not in (Scheme.SP_NOSUB, Scheme.SP_PERFSUB):
        raise ValueError("evaluate_sp handles superimposed-pilot schemes only")
    y = y - (b * feat.self_amp)[None, :, None] * feat.h2[:, :, None] * feat.s_t
    res = sp_residual_stats(y, feat.phase)
    return np.concatenate([feat.h2[..., None], feat.h2[..., None] ** 2, res], axis=-1)


def _sp_estimate(stats: np.ndarray, c: np.ndarray, n_batches: int):
    def fn(m):
        h2, h4, wr, wi, w2 = (m[:, i] for i in range(5))
        var_n = w2 - (wr ** 2 + wi ** 2)
        gain = c * h2 ** 2
        nc = c * (h4 - h2 ** 2) + var_n
        return np.stack([gain, nc, var_n, gain / nc], axis=-1)
    return batch_jackknife(stats, fn, n_batches)


# -------------------------------------------------------------- interface

def _as_snapshot(obj, cfg, scheme, cell, k=0) -> LsfSnapshot:
    if isinstance(obj, LsfSnapshot):
        return obj
    return LsfSnapshot.from_network(obj, cfg, scheme, cell=cell, k=k)


def empirical_sinr_snapshot(scheme, snap: LsfSnapshot, cfg: SystemConfig, n_fading: int,
                            seed: int, *, ks=None, n_batches: int = 20, threads: int = 1,
                            stream=(0,), subtraction_floor: float | None = None,
                            features: SpFeatures | None = None) -> McEstimate:
    """Monte Carlo SINR of the typical UEs ``ks`` (default all) of ``snap.cell``."""
    scheme = Scheme.parse(scheme)
    if n_fading < MIN_FADING:
        raise ValueError(f"n_fading must be at least {MIN_FADING}")
    links = LinkSet.from_snapshot(snap, cfg, scheme, ks)
    ks = tuple(int(t - snap.cell * links.K) for t in links.typ)
    h = config_hash(cfg)
    if scheme is Scheme.RP:
        st = simulate_rp(links, cfg.M, cfg.tau_p, n_fading, seed, stream=stream, threads=threads)
        est = _rp_estimate(st, links.ad[links.typ] ** 2, n_batches)
        v = est.value
        bds = tuple(SinrBreakdown(v[i, 0], 0.0, 0.0, v[i, 1], v[i, 2]) for i in range(len(ks)))
        return McEstimate(scheme, ks, bds, est.se[:, 3], est.dof, n_fading, seed, h)
    if features is None:
        features = sp_features(links, cfg.M, cfg.tau_c, n_fading, seed, stream=stream,
                               threads=threads, subtraction_floor=subtraction_floor)
    st = evaluate_sp(features, cfg.delta, scheme)
    c = (1.0 - cfg.delta) * features.c_unit
    est = _sp_estimate(st, c, n_batches)
    v = est.value
    bds = tuple(SinrBreakdown(v[i, 0], 0.0, 0.0, v[i, 1], 0.0) for i in range(len(ks)))
    return McEstimate(scheme, ks, bds, est.se[:, 3], est.dof, features.n, seed, h,
                      extra={"var_neff": [float(x) for x in v[:, 2]],
                             "var_neff_se": [float(x) for x in est.se[:, 2]]})


def empirical_sinr(scheme, net, cfg: SystemConfig, n_fading: int, seed: int, *, cell: int = 0,
                   ks=None, **kw) -> McEstimate:
    """Monte Carlo effective SINR of the UEs of cell ``cell`` in deployment ``net``.

    Powers follow channel inversion for ``scheme``. ``net`` may also be an
    :class:`LsfSnapshot` with arbitrary powers.

    Raises
    ------
    ValueError
        If ``n_fading < 100``.
    """
    snap = _as_snapshot(net, cfg, scheme, cell)
    return empirical_sinr_snapshot(scheme, snap, cfg, n_fading, seed, ks=ks, **kw)


def neff_variance(snap: LsfSnapshot, cfg: SystemConfig, n_fading: int, seed: int, **kw):
    """Empirical variance of the SP effective noise (no subtraction) with its s.e."""
    est = empirical_sinr_snapshot(Scheme.SP_NOSUB, snap, cfg, n_fading, seed, **kw)
    return np.array(est.extra["var_neff"]), np.array(est.extra["var_neff_se"]), est.dof
