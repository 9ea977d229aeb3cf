"""Reference (single-draw) channel estimation at the typical BS.

These routines build the received pilot signal explicitly and are meant for
validation; the batched engine in :mod:`spmimo.montecarlo.engine` computes
the same quantities without materializing the full received matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..closed_form import LsfSnapshot
from ..core import SystemConfig
from .pilots import PilotBook, dft_pilots

__all__ = ["FadingDraw", "EstimationOutput", "draw_fading", "received_pilot_signal",
           "estimate_rp", "estimate_sp", "lmmse_from_full"]


def _cn(gen, shape, var=1.0):
    return np.sqrt(np.asarray(var) / 2.0) * (gen.standard_normal(shape)
                                             + 1j * gen.standard_normal(shape))


@dataclass(frozen=True)
class FadingDraw:
    """Small-scale fading of one coherence block at the typical BS.

    Attributes
    ----------
    h : ndarray, shape (n, K, M)
        ``h[l', i] ~ CN(0, beta_cross[l', i] I)``.
    s : ndarray, shape (n, K, tau)
        Unit-variance data symbols per UE and sample.
    noise : ndarray, shape (M, tau)
        Receiver noise, per-entry variance ``sigma2``.
    """

    h: np.ndarray
    s: np.ndarray
    noise: np.ndarray


def draw_fading(gen: np.random.Generator, snap: LsfSnapshot, M: int, tau: int,
                sigma2: float) -> FadingDraw:
    n, K = snap.beta_cross.shape
    h = _cn(gen, (n, K, M), snap.beta_cross[..., None])
    s = _cn(gen, (n, K, tau))
    noise = _cn(gen, (M, tau), sigma2)
    return FadingDraw(h, s, noise)


@dataclass(frozen=True)
class EstimationOutput:
    """Estimate of the typical UE's channel.

    ``z`` is the despread statistic, ``gamma_bar`` the realized estimation
    quality (estimate variance over channel variance, per antenna) and
    ``detector`` the MRC vector normalized so that ``E{v^H h} = sqrt(M beta)``.
    """

    h_hat: np.ndarray
    gamma_bar: float
    z: np.ndarray
    detector: np.ndarray


def received_pilot_signal(snap: LsfSnapshot, pilots: PilotBook, draw: FadingDraw,
                          superimposed: bool) -> np.ndarray:
    """Received ``M x tau`` matrix over the pilot samples.

    With regular pilots only pilot symbols are sent; with superimposed pilots
    every sample also carries data.
    """
    seq = pilots.sequences()                                   # (n, K, tau)
    x = np.sqrt(snap.q)[..., None] * seq
    if superimposed:
        x = x + np.sqrt(snap.p)[..., None] * draw.s[..., : pilots.tau]
    return np.einsum("lim,lij->mj", draw.h, x) + draw.noise[:, : pilots.tau]


def _finish(snap, pilots, z, gamma_bar, q0, tau, M):
    c, k = snap.cell, snap.k
    b0 = snap.beta_cross[c, k]
    h_hat = gamma_bar / np.sqrt(q0 * tau) * z
    detector = z / np.sqrt(q0 * tau * M * b0)
    return EstimationOutput(h_hat, float(gamma_bar), z, detector)


def estimate_rp(snap: LsfSnapshot, pilots: PilotBook, draw: FadingDraw,
                cfg: SystemConfig) -> EstimationOutput:
    """MMSE estimate from ``tau_p`` regular pilot samples.

    ``z = Y phi^* / sqrt(tau_p)`` and ``h_hat = gamma_bar z / sqrt(q tau_p)``
    with ``gamma_bar = q tau_p beta / (tau_p sum_{chi} q beta + sigma2)``.
    """
    if pilots.tau != cfg.tau_p:
        raise ValueError("RP pilots must have length tau_p")
    c, k = snap.cell, snap.k
    tau = pilots.tau
    Y = received_pilot_signal(snap, pilots, draw, superimposed=False)
    phi = dft_pilots(tau)[pilots.assignment[c, k]]
    z = Y @ phi.conj() / np.sqrt(tau)
    chi = pilots.chi.astype(bool)
    q0, b0 = snap.q[c, k], snap.beta_cross[c, k]
    den = tau * np.sum(snap.q[chi] * snap.beta_cross[chi]) + cfg.sigma2
    return _finish(snap, pilots, z, q0 * tau * b0 / den, q0, tau, cfg.M)


def estimate_sp(snap: LsfSnapshot, pilots: PilotBook, draw: FadingDraw,
                cfg: SystemConfig) -> EstimationOutput:
    """LMMSE estimate from ``tau_c`` samples of superimposed pilots and data.

    Data of every UE leaks into the despread statistic and acts as extra
    white noise of power ``sum p beta``.
    """
    if pilots.tau != cfg.tau_c:
        raise ValueError("SP pilots must have length tau_c")
    c, k = snap.cell, snap.k
    tau = pilots.tau
    Y = received_pilot_signal(snap, pilots, draw, superimposed=True)
    phi = dft_pilots(tau)[pilots.assignment[c, k]]
    z = Y @ phi.conj() / np.sqrt(tau)
    chi = pilots.chi.astype(bool)
    q0, b0 = snap.q[c, k], snap.beta_cross[c, k]
    den = (tau * np.sum(snap.q[chi] * snap.beta_cross[chi])
           + np.sum(snap.p * snap.beta_cross) + cfg.sigma2)
    return _finish(snap, pilots, z, q0 * tau * b0 / den, q0, tau, cfg.M)


def lmmse_from_full(Y: np.ndarray, snap: LsfSnapshot, pilots: PilotBook, sigma2: float,
                    superimposed: bool) -> np.ndarray:
    """LMMSE estimate of the typical channel from the full received matrix.

    Each antenna row ``r`` of ``Y`` has covariance
    ``R = sum_u q_u beta_u phi_u phi_u^H + (sum_u p_u beta_u + sigma2) I`` (the
    data term only with superimposed pilots), and the estimate is
    ``sqrt(q_0) beta_0 phi_0^H R^{-1} r``.
    """
    tau = pilots.tau
    seq = pilots.sequences().reshape(-1, tau)
    qb = (snap.q * snap.beta_cross).reshape(-1)
    white = sigma2 + (np.sum(snap.p * snap.beta_cross) if superimposed else 0.0)
    R = (seq.T * qb) @ seq.conj() + white * np.eye(tau)
    c, k = snap.cell, snap.k
    phi0 = pilots.sequences()[c, k]
    x = np.linalg.solve(R, Y.T)                                # R^{-1} r for every row
    return np.sqrt(snap.q[c, k]) * snap.beta_cross[c, k] * (phi0.conj() @ x)
