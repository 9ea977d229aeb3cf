"""One-dimensional maximizers for pilot length and pilot power fraction."""
from __future__ import annotations

import math

import numpy as np

__all__ = ["optimize_tau_p", "optimize_delta", "ternary_search_int", "golden_section_max"]

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _evaluate(objective, xs, map_fn):
    mapper = map if map_fn is None else map_fn
    return [float(v) for v in mapper(objective, list(xs))]


def optimize_tau_p(objective, k: int, tau_c: int, map_fn=None) -> tuple[int, float]:
    """Exhaustive integer search over ``[k, tau_c]``; ties go to the smallest value.

    ``map_fn`` (e.g. ``executor.map``) may evaluate points concurrently; the
    reduction is always in index order.
    """
    if k > tau_c:
        raise ValueError("empty search range: k > tau_c")
    xs = range(int(k), int(tau_c) + 1)
    vals = _evaluate(objective, xs, map_fn)
    best = 0
    for i, v in enumerate(vals):
        if v > vals[best]:
            best = i
    return xs[best], vals[best]


def ternary_search_int(objective, lo: int, hi: int) -> tuple[int, float]:
    """Maximizer of a unimodal integer function on ``[lo, hi]`` (smallest on ties)."""
    cache = {}

    def f(x):
        if x not in cache:
            cache[x] = float(objective(x))
        return cache[x]

    while hi - lo > 2:
        m1 = lo + (hi - lo) // 3
        m2 = hi - (hi - lo) // 3
        if f(m1) < f(m2):
            lo = m1 + 1
        else:
            hi = m2
    best = max(range(lo, hi + 1), key=lambda x: (f(x), -x))
    return best, f(best)


def golden_section_max(objective, a: float, b: float, tol: float = 1e-3):
    """Golden-section search for the maximum of a unimodal function on ``[a, b]``.

    Returns ``(x, f(x), evaluated)`` where ``evaluated`` lists every ``(x, f)`` pair.
    """
    seen = []

    def f(x):
        v = float(objective(x))
        seen.append((x, v))
        return v

    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x), seen


def optimize_delta(objective, grid_step: float = 0.01, tol: float = 1e-3,
                   map_fn=None) -> tuple[float, float]:
    """Maximize ``objective`` on ``(0, 1)``.

    Scans ``{s, 2s, ..., 1 - s}`` and refines by golden-section search on the
    grid cells adjacent to the grid maximizer. The refined point is kept only
    if it improves on the grid and stays within ``grid_step`` of it; the
    returned value is the best among all evaluated points.
    """
    if not 0.0 < grid_step <= 0.5:
        raise ValueError("grid_step must lie in (0, 0.5]")
    n = int(math.floor(1.0 / grid_step + 1e-9))
    grid = [round(i * grid_step, 12) for i in range(1, n + 1) if i * grid_step < 1.0 - 1e-12]
    vals = _evaluate(objective, grid, map_fn)
    finite = [v if math.isfinite(v) else -math.inf for v in vals]
    ig = int(np.argmax(finite))
    xg, vg = grid[ig], finite[ig]
    lo = grid[ig - 1] if ig > 0 else 0.5 * grid[0]
    hi = grid[ig + 1] if ig + 1 < len(grid) else 0.5 * (1.0 + grid[-1])
    if hi - lo <= tol:
        return xg, vg
    _, _, seen = golden_section_max(objective, lo, hi, tol)
    xb, vb = xg, vg
    for x, v in seen:
        if math.isfinite(v) and v > vb and abs(x - xg) <= grid_step:
            xb, vb = x, v
    return xb, vb
