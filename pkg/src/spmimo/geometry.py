"""Random deployments on a wrap-around square and their large-scale fading.

BSs form a homogeneous PPP on a square of side ``L`` whose opposite edges are
identified (a torus), so every BS sees statistically the same surroundings.
Each cell receives exactly ``K`` UEs placed uniformly in its Voronoi region.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import rng as _rng
from .core import SystemConfig
from .kernels import accept_first_k, nearest_index_torus

__all__ = [
    "NetworkRealization",
    "RejectionCapExceeded",
    "sample_network",
    "sample_network_retry",
    "side_length_for",
    "torus_distance",
    "expected_d_alpha",
    "expected_ratio_moment",
    "cross_moment_bound",
    "rayleigh_cdf",
    "typical_user_draws",
    "MomentEstimate",
    "LsfMomentReport",
    "lsf_moment_check",
    "write_network_csv",
]


class RejectionCapExceeded(RuntimeError):
    """UE placement needed more proposals than allowed (a tiny Voronoi cell)."""


def torus_distance(a, b, side: float) -> np.ndarray:
    """Wrap-around Euclidean distance between broadcastable point arrays ``(..., 2)``."""
    diff = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    diff = np.minimum(diff, side - diff)
    return np.sqrt((diff ** 2).sum(axis=-1))


def side_length_for(n_av: float, density: float) -> float:
    """Side length giving ``n_av`` BSs on average at ``density`` BS/km^2."""
    return math.sqrt(n_av / density)


@dataclass(frozen=True)
class NetworkRealization:
    """One spatial draw.

    Attributes
    ----------
    bs_xy : ndarray, shape (n, 2)
    ue_xy : ndarray, shape (n, K, 2)
        ``ue_xy[l', i]`` is UE ``i`` of cell ``l'``.
    d : ndarray, shape (n, n, K)
        ``d[l, l', i]``: wrap-around distance from BS ``l`` to UE ``(l', i)`` in km.
    beta : ndarray, shape (n, n, K)
        ``1 / (omega * d**alpha)``.
    side_length : float
        Side of the square window in km.
    """

    bs_xy: np.ndarray
    ue_xy: np.ndarray
    d: np.ndarray
    beta: np.ndarray
    side_length: float

    @property
    def n_bs(self) -> int:
        return self.bs_xy.shape[0]

    @property
    def K(self) -> int:
        return self.ue_xy.shape[1]

    def serving_distance(self) -> np.ndarray:
        idx = np.arange(self.n_bs)
        return self.d[idx, idx]

    def serving_beta(self) -> np.ndarray:
        """``beta[l', l', i]``, shape (n, K)."""
        idx = np.arange(self.n_bs)
        return self.beta[idx, idx]

    @classmethod
    def from_positions(cls, bs_xy, ue_xy, side_length, alpha, omega) -> "NetworkRealization":
        bs_xy = np.asarray(bs_xy, dtype=float)
        ue_xy = np.asarray(ue_xy, dtype=float)
        d = torus_distance(bs_xy[:, None, None, :], ue_xy[None, :, :, :], side_length)
        beta = 1.0 / (omega * d ** alpha)
        for a in (bs_xy, ue_xy, d, beta):
            a.setflags(write=False)
        return cls(bs_xy, ue_xy, d, beta, float(side_length))


def sample_network(cfg: SystemConfig, seed: int, *, n_av: float = 50.0, n_bs: int | None = None,
                   max_proposals: int = 1_000_000, index: int = 0) -> NetworkRealization:
    """Draw one deployment.

    The number of BSs is Poisson with mean ``n_av`` and redrawn while below 2.
    UEs are placed by rejection: uniform proposals on the square are assigned
    to their nearest BS and accepted while that cell holds fewer than ``K``,
    which yields ``K`` i.i.d. uniform points in every Voronoi cell.

    Parameters
    ----------
    cfg : SystemConfig
        Supplies ``K``, ``alpha``, ``omega`` and ``density``.
    seed : int
        Base seed; the stream is keyed by ``(GEOMETRY, index)``.
    n_av : float
        Mean number of BSs in the window; sets the side length.
    n_bs : int, optional
        Force the BS count (test hook; 1 gives an interference-free network).
    max_proposals : int
        Rejection cap.

    Raises
    ------
    RejectionCapExceeded
        If the cap is hit; draw again with another ``index``.
    """
    gen = _rng.substream(seed, _rng.GEOMETRY, index)
    side = side_length_for(n_av, cfg.density)
    if n_bs is None:
        n = int(gen.poisson(n_av))
        while n < 2:
            n = int(gen.poisson(n_av))
    else:
        if n_bs < 1:
            raise ValueError("n_bs must be positive")
        n = int(n_bs)
    K = cfg.K
    bs = gen.uniform(0.0, side, size=(n, 2))
    ue = np.empty((n, K, 2))
    counts = np.zeros(n, dtype=np.int64)
    chunk = max(256, 4 * n * K)
    used = 0
    while counts.min() < K:
        if used >= max_proposals:
            raise RejectionCapExceeded(
                f"placing {K} UEs per cell needed more than {max_proposals} proposals")
        m = min(chunk, max_proposals - used)
        prop = gen.uniform(0.0, side, size=(m, 2))
        used += m
        owner = nearest_index_torus(prop, bs, side)
        slot0 = counts.copy()
        acc = accept_first_k(owner, counts, K)
        # slots follow acceptance order within each cell
        ao = owner[acc]
        order = np.argsort(ao, kind="stable")
        so = ao[order]
        starts = np.r_[0, np.flatnonzero(np.diff(so)) + 1] if so.size else np.zeros(0, int)
        rank = np.empty(so.size, dtype=np.int64)
        if so.size:
            run = np.repeat(starts, np.diff(np.r_[starts, so.size]))
            rank[order] = np.arange(so.size) - run
        ue[ao, slot0[ao] + rank] = prop[acc]
    return NetworkRealization.from_positions(bs, ue, side, cfg.alpha, cfg.omega)


def sample_network_retry(cfg: SystemConfig, seed: int, index: int, *, n_av: float = 50.0,
                         attempts: int = 100, **kw) -> NetworkRealization:
    """:func:`sample_network` that redraws pathological deployments.

    Retry ``r`` of network ``index`` uses the key ``index + r * 2**32``.
    """
    for r in range(attempts):
        try:
            return sample_network(cfg, seed, n_av=n_av, index=index + r * 2 ** 32, **kw)
        except RejectionCapExceeded:
            continue
    raise RejectionCapExceeded(f"{attempts} consecutive pathological draws")


# ------------------------------------------------------------ PPP moments

def expected_d_alpha(alpha: float, density: float) -> float:
    """Mean of ``d**alpha`` for the nearest-BS distance of a PPP of intensity ``density``."""
    return math.exp(math.lgamma(alpha / 2 + 1) - (alpha / 2) * math.log(math.pi * density))


def expected_ratio_moment(alpha: float, kappa: int) -> float:
    """Mean over interfering UEs of ``(d_serving / d_typical)**(kappa*alpha)`` summed."""
    if kappa * alpha <= 2:
        raise ValueError("moment infinite for kappa*alpha <= 2")
    return 2.0 / (kappa * alpha - 2.0)


def cross_moment_bound(alpha: float) -> float:
    return 1.0 / (alpha - 1.0)


def rayleigh_cdf(r, density: float):
    """CDF of the nearest-BS distance: ``1 - exp(-pi D r^2)``."""
    r = np.asarray(r, dtype=float)
    return -np.expm1(-math.pi * density * np.maximum(r, 0.0) ** 2)


def typical_user_draws(cfg: SystemConfig, n_trials: int, seed: int, *, n_av: float = 1000.0,
                       kappas=(1, 2)):
    """Per-trial statistics of a typical BS with a PPP of UEs served by nearest BS.

    UEs form a PPP of the same intensity as the BSs, independent of them. For
    each trial this returns the serving distance of one UE, the mean of
    ``d_serving**alpha`` over all UEs in the window, and for each ``kappa`` the
    sum over UEs not served by BS 0 of ``(d_serving/d_0)**(kappa*alpha)``.

    Returns
    -------
    dict of ndarray, each of length ``n_trials``
    """
    side = side_length_for(n_av, cfg.density)
    a = cfg.alpha
    first_d = np.empty(n_trials)
    mean_da = np.full(n_trials, np.nan)
    sums = {k: np.zeros(n_trials) for k in kappas}
    for t in range(n_trials):
        gen = _rng.substream(seed, _rng.MOMENTS, t)
        n = max(int(gen.poisson(n_av)), 1)
        bs = gen.uniform(0.0, side, size=(n, 2))
        m = max(int(gen.poisson(n_av)), 1)
        ue = gen.uniform(0.0, side, size=(m, 2))
        tree = cKDTree(bs, boxsize=side)
        ds, owner = tree.query(ue)
        first_d[t] = ds[0]
        mean_da[t] = np.mean(ds ** a)
        other = owner != 0
        d0 = torus_distance(ue[other], bs[0], side)
        r = (ds[other] / d0) ** a
        for k in kappas:
            sums[k][t] = np.sum(r ** k)
    return {"first_distance": first_d, "mean_d_alpha": mean_da,
            **{f"kappa{k}": v for k, v in sums.items()}}


@dataclass(frozen=True)
class MomentEstimate:
    mean: float
    se: float
    reference: float

    @property
    def z(self) -> float:
        return (self.mean - self.reference) / self.se if self.se > 0 else math.inf


@dataclass(frozen=True)
class LsfMomentReport:
    d_alpha: MomentEstimate
    kappa: dict
    cross: MomentEstimate
    n_trials: int

    def to_dict(self) -> dict:
        def m(e):
            return {"mean": e.mean, "se": e.se, "reference": e.reference}
        return {"n_trials": self.n_trials, "d_alpha": m(self.d_alpha),
                "kappa": {str(k): m(v) for k, v in self.kappa.items()},
                "cross": m(self.cross)}


def _est(x, ref) -> MomentEstimate:
    x = np.asarray(x, dtype=float)
    return MomentEstimate(float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)), float(ref))


def cross_moment_draws(cfg: SystemConfig, n_trials: int, seed: int, *, n_av: float = 50.0):
    """Per network: sum over other cells of ``r_1 * r_2`` for two UEs of each cell,
    ``r_i = (d_serving / d_0)**alpha``, with two UEs per cell."""
    c2 = cfg.replace(K=2, tau_p=max(cfg.tau_p, 2))
    out = np.empty(n_trials)
    for t in range(n_trials):
        net = sample_network_retry(c2, seed, t, n_av=n_av)
        r = (net.serving_distance()[1:] / net.d[0, 1:]) ** cfg.alpha
        out[t] = np.sum(r[:, 0] * r[:, 1])
    return out


def lsf_moment_check(cfg: SystemConfig, n_trials: int, seed: int = 0, *,
                     n_av_window: float = 1000.0, n_av_cross: float = 50.0) -> LsfMomentReport:
    """Monte Carlo estimates of the PPP distance moments with standard errors.

    The ratio moments use a large window (``n_av_window`` BSs on average) with
    a typical-user PPP so that truncation bias stays well below the standard
    error; the cross moment uses :func:`sample_network` deployments with two
    UEs per cell.
    """
    if cfg.alpha <= 2:
        raise ValueError("alpha must exceed 2")
    draws = typical_user_draws(cfg, n_trials, seed, n_av=n_av_window, kappas=(1, 2))
    cross = cross_moment_draws(cfg, n_trials, seed, n_av=n_av_cross)
    return LsfMomentReport(
        d_alpha=_est(draws["mean_d_alpha"], expected_d_alpha(cfg.alpha, cfg.density)),
        kappa={k: _est(draws[f"kappa{k}"], expected_ratio_moment(cfg.alpha, k)) for k in (1, 2)},
        cross=_est(cross, cross_moment_bound(cfg.alpha)),
        n_trials=n_trials,
    )


def write_network_csv(net: NetworkRealization, path) -> None:
    """Flat CSV with one row per BS, per UE and per (BS, UE) gain."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "l", "lp", "i", "x", "y", "d", "beta"])
        for l, (x, y) in enumerate(net.bs_xy):
            w.writerow(["bs", l, "", "", repr(float(x)), repr(float(y)), "", ""])
        for lp in range(net.n_bs):
            for i in range(net.K):
                x, y = net.ue_xy[lp, i]
                w.writerow(["ue", "", lp, i, repr(float(x)), repr(float(y)), "", ""])
        for l in range(net.n_bs):
            for lp in range(net.n_bs):
                for i in range(net.K):
                    w.writerow(["link", l, lp, i, "", "", repr(float(net.d[l, lp, i])),
                                repr(float(net.beta[l, lp, i]))])
