"""Hot numeric kernels: SAD block matching, seam DP, and the SMO solver.

Each kernel is written as a plain loop over float64 arrays and decorated
with ``@njit`` when the numba backend is active (see ``_accel``). The
interpreted originals stay reachable through ``.py_func`` / ``python_impl``.
"""

import numpy as np

from ._accel import njit


@njit(cache=True)
def window_sad(left, right, i, j, d, radius):
    """SAD between the left window at (i, j) and the right window at (i, j-d).

    Windows are edge-replicated, so out-of-range taps read the nearest
    border pixel.
    """
    h, w = left.shape
    s = 0.0
    jr = j - d
    for wy in range(-radius, radius + 1):
        yy = i + wy
        if yy < 0:
            yy = 0
        elif yy >= h:
            yy = h - 1
        for wx in range(-radius, radius + 1):
            xl = j + wx
            if xl < 0:
                xl = 0
            elif xl >= w:
                xl = w - 1
            xr = jr + wx
            if xr < 0:
                xr = 0
            elif xr >= w:
                xr = w - 1
            diff = left[yy, xl] - right[yy, xr]
            if diff < 0.0:
                diff = -diff
            s += diff
    return s


@njit(cache=True)
def sad_disparity(left, right, radius, cands, smin, smax, subpixel):
    """Winner-takes-all SAD search over the candidate shifts in ``cands``.

    ``cands`` must already be ordered by preference (the caller sorts by
    (|d|, d)); a strict improvement test then realises the tie-break. With
    ``subpixel`` a parabola through the SADs at d-1, d, d+1 refines the
    winner when both neighbours lie inside [smin, smax].
    """
    h, w = left.shape
    out = np.empty((h, w), np.float64)
    n_c = cands.shape[0]
    for i in range(h):
        for j in range(w):
            best_sad = np.inf
            best_d = 0
            for ci in range(n_c):
                d = cands[ci]
                s = window_sad(left, right, i, j, d, radius)
                if s < best_sad:
                    best_sad = s
                    best_d = d
            dd = float(best_d)
            if subpixel and best_d > smin and best_d < smax:
                sm = window_sad(left, right, i, j, best_d - 1, radius)
                sp = window_sad(left, right, i, j, best_d + 1, radius)
                denom = sm - 2.0 * best_sad + sp
                if denom > 1e-12:
                    off = 0.5 * (sm - sp) / denom
                    if off > 0.5:
                        off = 0.5
                    elif off < -0.5:
                        off = -0.5
                    dd += off
            out[i, j] = dd
    return out


@njit(cache=True)
def min_vertical_seam(energy):
    """Minimal-cumulative-energy 8-connected top-to-bottom seam.

    M(i, j) = e(i, j) + min(M(i-1, j-1..j+1)); every tie (parent choice and
    the final argmin) resolves to the leftmost column.
    """
    h, w = energy.shape
    parent = np.empty((h, w), np.int32)
    m_prev = np.empty(w, np.float64)
    m_cur = np.empty(w, np.float64)
    for j in range(w):
        m_prev[j] = energy[0, j]
    for i in range(1, h):
        for j in range(w):
            lo = j - 1 if j > 0 else 0
            hi = j + 1 if j < w - 1 else w - 1
            bk = lo
            bv = m_prev[lo]
            for k in range(lo + 1, hi + 1):
                if m_prev[k] < bv:
                    bv = m_prev[k]
                    bk = k
            parent[i, j] = bk
            m_cur[j] = energy[i, j] + bv
        m_prev, m_cur = m_cur, m_prev
    bj = 0
    bv = m_prev[0]
    for j in range(1, w):
        if m_prev[j] < bv:
            bv = m_prev[j]
            bj = j
    seam = np.empty(h, np.int64)
    j = bj
    for i in range(h - 1, -1, -1):
        seam[i] = j
        if i > 0:
            j = parent[i, j]
    return seam


@njit(cache=True)
def smo_epsilon_svr(K, y, C, eps, tol, max_iter):
    """SMO on the 2n-variable epsilon-SVR dual with maximal-violating-pair
    working sets (ties to the lowest index).

    Variables are stacked [alpha; alpha*] with signs t = +1 / -1. Returns
    (beta, bias, sum(alpha)+sum(alpha*), iterations, final KKT violation);
    convergence means violation <= tol.
    """
    n = y.shape[0]
    two_n = 2 * n
    lam = np.zeros(two_n, np.float64)
    G = np.empty(two_n, np.float64)
    for k in range(n):
        G[k] = eps - y[k]
        G[n + k] = eps + y[k]
    it = 0
    viol = 0.0
    while it < max_iter:
        m_up = -np.inf
        m_low = np.inf
        i_up = -1
        i_low = -1
        for k in range(two_n):
            t = 1.0 if k < n else -1.0
            mtg = -t * G[k]
            if (t > 0.0 and lam[k] < C) or (t < 0.0 and lam[k] > 0.0):
                if mtg > m_up:
                    m_up = mtg
                    i_up = k
            if (t > 0.0 and lam[k] > 0.0) or (t < 0.0 and lam[k] < C):
                if mtg < m_low:
                    m_low = mtg
                    i_low = k
        viol = m_up - m_low
        if i_up < 0 or i_low < 0 or viol <= tol:
            break
        i = i_up
        j = i_low
        ib = i if i < n else i - n
        jb = j if j < n else j - n
        ti = 1.0 if i < n else -1.0
        tj = 1.0 if j < n else -1.0
        eta = K[ib, ib] + K[jb, jb] - 2.0 * K[ib, jb]
        if eta < 1e-12:
            eta = 1e-12
        d = viol / eta
        # keep lam[i] + ti*d and lam[j] - tj*d inside [0, C]
        dmax_i = C - lam[i] if ti > 0.0 else lam[i]
        dmax_j = lam[j] if tj > 0.0 else C - lam[j]
        if d > dmax_i:
            d = dmax_i
        if d > dmax_j:
            d = dmax_j
        lam[i] += ti * d
        lam[j] -= tj * d
        if lam[i] < 0.0:
            lam[i] = 0.0
        elif lam[i] > C:
            lam[i] = C
        if lam[j] < 0.0:
            lam[j] = 0.0
        elif lam[j] > C:
            lam[j] = C
        for k in range(n):
            dk = d * (K[k, ib] - K[k, jb])
            G[k] += dk
            G[n + k] -= dk
        it += 1
    m_up = -np.inf
    m_low = np.inf
    for k in range(two_n):
        t = 1.0 if k < n else -1.0
        mtg = -t * G[k]
        if (t > 0.0 and lam[k] < C) or (t < 0.0 and lam[k] > 0.0):
            if mtg > m_up:
                m_up = mtg
        if (t > 0.0 and lam[k] > 0.0) or (t < 0.0 and lam[k] < C):
            if mtg < m_low:
                m_low = mtg
    if m_up == -np.inf and m_low == np.inf:
        b = 0.0
    elif m_up == -np.inf:
        b = m_low
    elif m_low == np.inf:
        b = m_up
    else:
        b = 0.5 * (m_up + m_low)
    beta = np.empty(n, np.float64)
    alpha_total = 0.0
    for k in range(n):
        beta[k] = lam[k] - lam[n + k]
        alpha_total += lam[k] + lam[n + k]
    return beta, b, alpha_total, it, viol
