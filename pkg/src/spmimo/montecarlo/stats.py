"""Confidence intervals for smooth functions of Monte Carlo means.

Draws are grouped into contiguous batches; the batch means feed a
delete-one jackknife, which handles ratio estimators such as an SINR whose
numerator and denominator are both sample means.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

__all__ = ["JackknifeEstimate", "batch_jackknife", "t_quantile"]


def t_quantile(level: float, dof: int, n_tests: int = 1) -> float:
    """Two-sided Student-t quantile; ``n_tests > 1`` applies a Bonferroni correction."""
    alpha = (1.0 - level) / n_tests
    return float(stats.t.ppf(1.0 - alpha / 2.0, dof))


@dataclass(frozen=True)
class JackknifeEstimate:
    value: np.ndarray
    se: np.ndarray
    dof: int

    def half_width(self, level: float = 0.95, n_tests: int = 1) -> np.ndarray:
        return t_quantile(level, self.dof, n_tests) * self.se


def batch_jackknife(samples: np.ndarray, fn, n_batches: int = 20) -> JackknifeEstimate:
    """Jackknife estimate of ``fn(mean(samples, axis=0))``.

    Parameters
    ----------
    samples : ndarray, shape (n, ...)
        One row per independent draw.
    fn : callable
        Maps an array shaped like ``samples[0]`` to an array of estimates.
    n_batches : int
        Number of contiguous batches (reduced if there are fewer draws).
    """
    samples = np.asarray(samples)
    n = samples.shape[0]
    nb = max(2, min(n_batches, n))
    edges = np.linspace(0, n, nb + 1).astype(int)
    sums = np.stack([samples[a:b].sum(axis=0) for a, b in zip(edges[:-1], edges[1:])])
    counts = np.diff(edges).astype(float).reshape((-1,) + (1,) * (samples.ndim - 1))
    total, ntot = sums.sum(axis=0), counts.sum()
    full = np.asarray(fn(total / ntot))
    loo = np.stack([np.asarray(fn((total - sums[i]) / (ntot - counts[i]))) for i in range(nb)])
    mean_loo = loo.mean(axis=0)
    var = (nb - 1) / nb * ((loo - mean_loo) ** 2).sum(axis=0)
    return JackknifeEstimate(full, np.sqrt(var), nb - 1)


def mean_and_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()), math.nan
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))
