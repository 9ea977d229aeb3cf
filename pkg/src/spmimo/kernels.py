"""Hot loops with a numba implementation and a pure-numpy twin.

Each public name dispatches to the numba version unless numba is missing or
``SPMIMO_DISABLE_NUMBA`` is set. Both versions are importable directly
(``*_numba`` / ``*_numpy``) for testing and benchmarking.
"""
from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

__all__ = [
    "N_AGG",
    "interference_aggregates",
    "nearest_index_torus",
    "accept_first_k",
    "rp_draw_stats",
    "sp_residual_stats",
]

# Columns of the aggregate table, per typical BS l (Psi excludes cell l):
#   0 sum_all p*b      1 sum_psi q*b      2 sum_all q*b
#   3 sum_psi p*q*b^2  4 sum_psi q^2*b^2  5 sum_all p^2*b^2  6 sum_all p*q*b^2
N_AGG = 7


# ---------------------------------------------------------------- aggregates

@njit
def interference_aggregates_numba(beta, p, q, own):
    R, n, K = beta.shape
    out = np.zeros((R, N_AGG))
    comp = np.zeros(N_AGG)
    t = np.empty(N_AGG)
    for r in range(R):
        comp[:] = 0.0
        for lp in range(n):
            psi = 1.0 if lp != own[r] else 0.0
            for i in range(K):
                b = beta[r, lp, i]
                pb = p[lp, i] * b
                qb = q[lp, i] * b
                t[0] = pb
                t[1] = psi * qb
                t[2] = qb
                t[3] = psi * pb * qb
                t[4] = psi * qb * qb
                t[5] = pb * pb
                t[6] = pb * qb
                for c in range(N_AGG):
                    # Neumaier compensated sum
                    s = out[r, c]
                    tot = s + t[c]
                    if abs(s) >= abs(t[c]):
                        comp[c] += (s - tot) + t[c]
                    else:
                        comp[c] += (t[c] - tot) + s
                    out[r, c] = tot
        for c in range(N_AGG):
            out[r, c] += comp[c]
    return out


def interference_aggregates_numpy(beta, p, q, own):
    beta = np.asarray(beta, dtype=float)
    R, n, _ = beta.shape
    pb = p[None] * beta
    qb = q[None] * beta
    psi = (np.arange(n)[None, :] != np.asarray(own)[:, None])[:, :, None]
    out = np.empty((R, N_AGG))
    out[:, 0] = pb.sum(axis=(1, 2))
    out[:, 1] = np.where(psi, qb, 0.0).sum(axis=(1, 2))
    out[:, 2] = qb.sum(axis=(1, 2))
    out[:, 3] = np.where(psi, pb * qb, 0.0).sum(axis=(1, 2))
    out[:, 4] = np.where(psi, qb * qb, 0.0).sum(axis=(1, 2))
    out[:, 5] = (pb * pb).sum(axis=(1, 2))
    out[:, 6] = (pb * qb).sum(axis=(1, 2))
    return out


def interference_aggregates(beta, p, q, own):
    """Interference sums seen by each typical BS.

    Parameters
    ----------
    beta : ndarray, shape (R, n, K)
        ``beta[r, l', i]`` is the gain from UE ``(l', i)`` to typical BS ``r``.
    p, q : ndarray, shape (n, K)
        Data and pilot powers.
    own : ndarray of int, shape (R,)
        Cell index of each typical BS (excluded from the ``psi`` sums).

    Returns
    -------
    ndarray, shape (R, 7)
        See ``N_AGG`` column legend in the module source.
    """
    beta = np.ascontiguousarray(beta, dtype=np.float64)
    p = np.ascontiguousarray(p, dtype=np.float64)
    q = np.ascontiguousarray(q, dtype=np.float64)
    own = np.ascontiguousarray(own, dtype=np.int64)
    if USE_NUMBA:
        return interference_aggregates_numba(beta, p, q, own)
    return interference_aggregates_numpy(beta, p, q, own)


# ------------------------------------------------------------------ geometry

@njit
def nearest_index_torus_numba(pts, centers, side):
    m = pts.shape[0]
    n = centers.shape[0]
    out = np.empty(m, dtype=np.int64)
    half = 0.5 * side
    for a in range(m):
        best = np.inf
        arg = 0
        for b in range(n):
            dx = abs(pts[a, 0] - centers[b, 0])
            dy = abs(pts[a, 1] - centers[b, 1])
            if dx > half:
                dx = side - dx
            if dy > half:
                dy = side - dy
            d2 = dx * dx + dy * dy
            if d2 < best:
                best = d2
                arg = b
        out[a] = arg
    return out


def nearest_index_torus_numpy(pts, centers, side):
    diff = np.abs(pts[:, None, :] - centers[None, :, :])
    diff = np.minimum(diff, side - diff)
    return np.argmin((diff ** 2).sum(axis=-1), axis=1).astype(np.int64)


def nearest_index_torus(pts, centers, side):
    """Index of the nearest center to each point under the torus metric."""
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    if USE_NUMBA:
        return nearest_index_torus_numba(pts, centers, float(side))
    return nearest_index_torus_numpy(pts, centers, float(side))


@njit
def accept_first_k_numba(owner, counts, K):
    """Mark proposals accepted in order until each owner holds K."""
    acc = np.zeros(owner.shape[0], dtype=np.bool_)
    for a in range(owner.shape[0]):
        o = owner[a]
        if counts[o] < K:
            counts[o] += 1
            acc[a] = True
    return acc


def accept_first_k_numpy(owner, counts, K):
    # rank of each proposal among earlier proposals with the same owner
    order = np.argsort(owner, kind="stable")
    so = owner[order]
    starts = np.r_[0, np.flatnonzero(np.diff(so)) + 1]
    run_start = np.repeat(starts, np.diff(np.r_[starts, so.size]))
    rank = np.empty_like(owner)
    rank[order] = np.arange(so.size) - run_start
    acc = rank + counts[owner] < K
    np.add.at(counts, owner[acc], 1)
    return acc


def accept_first_k(owner, counts, K):
    """Sequential first-come acceptance; ``counts`` is updated in place."""
    owner = np.ascontiguousarray(owner, dtype=np.int64)
    if USE_NUMBA:
        return accept_first_k_numba(owner, counts, int(K))
    return accept_first_k_numpy(owner, counts, int(K))


# ------------------------------------------------------------- RP statistics

@njit
def rp_draw_stats_numba(H, group, nbar, n, aq, ad, tau_p, beta_t, typ):
    """Per-draw MRC statistics for regular pilots.

    For typical UE t the detector is ``v = z_t / (aq_t sqrt(tau_p M beta_t))``
    with ``z_t = sqrt(tau_p) sum_{u: group[u]==group[t]} aq_u h_u + nbar_t``.
    Returns, per draw and typical UE, columns
    ``[Re g_tt, Im g_tt, sum_u p_u |g_tu|^2, |v^H n|^2]``.
    """
    B, N, M = H.shape
    T = typ.shape[0]
    out = np.zeros((B, T, 4))
    z = np.empty(M, dtype=np.complex128)
    st = np.sqrt(tau_p)
    for b in range(B):
        for t in range(T):
            ut = typ[t]
            g0 = group[b, ut]
            for m in range(M):
                z[m] = nbar[b, t, m]
            for u in range(N):
                if group[b, u] == g0:
                    c = st * aq[u]
                    for m in range(M):
                        z[m] += c * H[b, u, m]
            scale = 1.0 / (aq[ut] * np.sqrt(tau_p * M * beta_t[t]))
            for m in range(M):
                z[m] *= scale
            s = 0.0
            comp = 0.0
            gtt = 0.0 + 0.0j
            for u in range(N):
                g = 0.0 + 0.0j
                for m in range(M):
                    g += np.conj(z[m]) * H[b, u, m]
                if u == ut:
                    gtt = g
                x = ad[u] * ad[u] * (g.real * g.real + g.imag * g.imag)
                tot = s + x
                if abs(s) >= abs(x):
                    comp += (s - tot) + x
                else:
                    comp += (x - tot) + s
                s = tot
            gn = 0.0 + 0.0j
            for m in range(M):
                gn += np.conj(z[m]) * n[b, m]
            out[b, t, 0] = gtt.real
            out[b, t, 1] = gtt.imag
            out[b, t, 2] = s + comp
            out[b, t, 3] = gn.real * gn.real + gn.imag * gn.imag
    return out


def rp_draw_stats_numpy(H, group, nbar, n, aq, ad, tau_p, beta_t, typ):
    B, N, M = H.shape
    same = group[:, None, :] == group[:, typ][:, :, None]          # (B, T, N)
    z = np.sqrt(tau_p) * np.einsum("btu,u,bum->btm", same, aq, H) + nbar
    z *= (1.0 / (aq[typ] * np.sqrt(tau_p * M * beta_t)))[None, :, None]
    g = np.einsum("btm,bum->btu", z.conj(), H)
    gtt = g[:, np.arange(typ.size), typ]
    interf = (np.abs(g) ** 2 * (ad ** 2)[None, None, :]).sum(axis=-1)
    gn = np.abs(np.einsum("btm,bm->bt", z.conj(), n)) ** 2
    return np.stack([gtt.real, gtt.imag, interf, gn], axis=-1)


def rp_draw_stats(H, group, nbar, n, aq, ad, tau_p, beta_t, typ):
    args = (np.ascontiguousarray(H, dtype=np.complex128),
            np.ascontiguousarray(group, dtype=np.int64),
            np.ascontiguousarray(nbar, dtype=np.complex128),
            np.ascontiguousarray(n, dtype=np.complex128),
            np.ascontiguousarray(aq, dtype=np.float64),
            np.ascontiguousarray(ad, dtype=np.float64),
            float(tau_p),
            np.ascontiguousarray(beta_t, dtype=np.float64),
            np.ascontiguousarray(typ, dtype=np.int64))
    if USE_NUMBA:
        return rp_draw_stats_numba(*args)
    return rp_draw_stats_numpy(*args)


# ------------------------------------------------------------- SP statistics

@njit
def sp_residual_stats_numba(r, phi_conj):
    """Rotate residuals by the conjugate typical pilot and reduce over samples.

    ``r`` has shape (B, T, tau) and ``phi_conj`` shape (B, T, tau). Returns
    (B, T, 3) columns ``[Re mean(w), Im mean(w), mean(|w|^2)]`` with
    ``w = r * phi_conj``.
    """
    B, T, tau = r.shape
    out = np.empty((B, T, 3))
    for b in range(B):
        for t in range(T):
            sr = 0.0
            si = 0.0
            s2 = 0.0
            c2 = 0.0
            for j in range(tau):
                w = r[b, t, j] * phi_conj[b, t, j]
                sr += w.real
                si += w.imag
                x = w.real * w.real + w.imag * w.imag
                tot = s2 + x
                if abs(s2) >= abs(x):
                    c2 += (s2 - tot) + x
                else:
                    c2 += (x - tot) + s2
                s2 = tot
            out[b, t, 0] = sr / tau
            out[b, t, 1] = si / tau
            out[b, t, 2] = (s2 + c2) / tau
    return out


def sp_residual_stats_numpy(r, phi_conj):
    w = r * phi_conj
    mw = w.mean(axis=-1)
    return np.stack([mw.real, mw.imag, (np.abs(w) ** 2).mean(axis=-1)], axis=-1)


def sp_residual_stats(r, phi_conj):
    r = np.ascontiguousarray(r, dtype=np.complex128)
    phi_conj = np.ascontiguousarray(phi_conj, dtype=np.complex128)
    if USE_NUMBA:
        return sp_residual_stats_numba(r, phi_conj)
    return sp_residual_stats_numpy(r, phi_conj)
