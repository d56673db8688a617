"""Inner loops shared by the simplex, topology checks and the EV pipeline.

Every public kernel has a numba version (``*_nb``) and a numpy version
(``*_np``).  The module-level name is bound to one of them according to
:data:`evdnr._accel.USE_NUMBA`; tests call both explicitly.
"""
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ._accel import USE_NUMBA, njit

# forest status codes
FOREST_OK = 0
FOREST_CYCLE = 1
FOREST_ROOTS = 2  # a tree with zero or several substations


# ---------------------------------------------------------------------------
# simplex ratio test
# ---------------------------------------------------------------------------

def _ratio_test_np(xb, lob, hib, delta, basis, t_own, tol, piv_tol, bland):
    m = xb.shape[0]
    dec = delta < -piv_tol
    inc = delta > piv_tol
    above = xb > hib + tol
    below = xb < lob - tol
    bound = np.full(m, np.nan)
    upper = np.zeros(m, dtype=np.bool_)

    # decreasing rows
    sel = dec & above
    bound[sel] = hib[sel]
    upper[sel] = True
    sel = dec & ~above & ~below & np.isfinite(lob)
    bound[sel] = lob[sel]
    # increasing rows
    sel = inc & below
    bound[sel] = lob[sel]
    sel = inc & ~below & ~above & np.isfinite(hib)
    bound[sel] = hib[sel]
    upper[sel] = True

    cand = ~np.isnan(bound)
    if not cand.any():
        return t_own, -1, False
    idx = np.nonzero(cand)[0]
    d = delta[idx]
    gap = np.abs(bound[idx] - xb[idx])
    ratio = np.maximum(gap / np.abs(d), 0.0)
    if bland:
        t_min = ratio.min()
        if t_own <= t_min:
            return t_own, -1, False
        ties = idx[ratio <= t_min + 1e-12]
        r = ties[np.argmin(basis[ties])]
        return max(t_min, 0.0), r, upper[r]
    relaxed = (gap + tol) / np.abs(d)
    t_max = relaxed.min()
    if t_own <= t_max and t_own <= ratio.min():
        return t_own, -1, False
    ok = ratio <= t_max
    pick = idx[ok][np.argmax(np.abs(d[ok]))]
    t = max(abs(bound[pick] - xb[pick]) / abs(delta[pick]), 0.0)
    if t_own < t:
        return t_own, -1, False
    return t, pick, upper[pick]


@njit(cache=True)
def _ratio_test_nb(xb, lob, hib, delta, basis, t_own, tol, piv_tol, bland):
    m = xb.shape[0]
    inf = np.inf
    # pass 1: exact minimum and Harris relaxed minimum
    t_min = inf
    t_max = inf
    for i in range(m):
        d = delta[i]
        if d < -piv_tol:
            if xb[i] > hib[i] + tol:
                b = hib[i]
            elif xb[i] >= lob[i] - tol and lob[i] > -inf:
                b = lob[i]
            else:
                continue
        elif d > piv_tol:
            if xb[i] < lob[i] - tol:
                b = lob[i]
            elif xb[i] <= hib[i] + tol and hib[i] < inf:
                b = hib[i]
            else:
                continue
        else:
            continue
        gap = abs(b - xb[i])
        ad = abs(d)
        r = gap / ad
        if r < t_min:
            t_min = r
        rr = (gap + tol) / ad
        if rr < t_max:
            t_max = rr
    if t_min == inf:
        return t_own, -1, False
    if bland:
        if t_own <= t_min:
            return t_own, -1, False
        best = -1
        best_col = 0
        up = False
        for i in range(m):
            d = delta[i]
            u = False
            if d < -piv_tol:
                if xb[i] > hib[i] + tol:
                    b = hib[i]
                    u = True
                elif xb[i] >= lob[i] - tol and lob[i] > -inf:
                    b = lob[i]
                else:
                    continue
            elif d > piv_tol:
                if xb[i] < lob[i] - tol:
                    b = lob[i]
                elif xb[i] <= hib[i] + tol and hib[i] < inf:
                    b = hib[i]
                    u = True
                else:
                    continue
            else:
                continue
            r = abs(b - xb[i]) / abs(d)
            if r <= t_min + 1e-12:
                if best < 0 or basis[i] < best_col:
                    best = i
                    best_col = basis[i]
                    up = u
        return max(t_min, 0.0), best, up
    if t_own <= t_max and t_own <= t_min:
        return t_own, -1, False
    # pass 2: largest pivot among rows within the relaxed bound
    best = -1
    best_piv = -1.0
    best_t = 0.0
    up = False
    for i in range(m):
        d = delta[i]
        u = False
        if d < -piv_tol:
            if xb[i] > hib[i] + tol:
                b = hib[i]
                u = True
            elif xb[i] >= lob[i] - tol and lob[i] > -inf:
                b = lob[i]
            else:
                continue
        elif d > piv_tol:
            if xb[i] < lob[i] - tol:
                b = lob[i]
            elif xb[i] <= hib[i] + tol and hib[i] < inf:
                b = hib[i]
                u = True
            else:
                continue
        else:
            continue
        r = abs(b - xb[i]) / abs(d)
        if r <= t_max and abs(d) > best_piv:
            best_piv = abs(d)
            best = i
            best_t = r
            up = u
    if t_own < best_t:
        return t_own, -1, False
    return max(best_t, 0.0), best, up


# ---------------------------------------------------------------------------
# product-form eta updates
# ---------------------------------------------------------------------------

# Eta ``j`` replaces basis row ``r[j]``; its column holds ``piv[j]`` at that row
# and the off-pivot nonzeros ``val[ptr[j]:ptr[j+1]]`` at rows ``idx[...]``.

def _eta_ftran_np(v, r, piv, ptr, idx, val, k):
    for j in range(k):
        vr = v[r[j]] / piv[j]
        if vr != 0.0:
            s, e = ptr[j], ptr[j + 1]
            v[idx[s:e]] -= val[s:e] * vr
        v[r[j]] = vr
    return v


@njit(cache=True)
def _eta_ftran_nb(v, r, piv, ptr, idx, val, k):
    for j in range(k):
        vr = v[r[j]] / piv[j]
        if vr != 0.0:
            for p in range(ptr[j], ptr[j + 1]):
                v[idx[p]] -= val[p] * vr
        v[r[j]] = vr
    return v


def _eta_btran_np(z, r, piv, ptr, idx, val, k):
    for j in range(k - 1, -1, -1):
        s, e = ptr[j], ptr[j + 1]
        z[r[j]] = (z[r[j]] - z[idx[s:e]] @ val[s:e]) / piv[j]
    return z


@njit(cache=True)
def _eta_btran_nb(z, r, piv, ptr, idx, val, k):
    for j in range(k - 1, -1, -1):
        acc = 0.0
        for p in range(ptr[j], ptr[j + 1]):
            acc += z[idx[p]] * val[p]
        z[r[j]] = (z[r[j]] - acc) / piv[j]
    return z


# ---------------------------------------------------------------------------
# sparse LU solves on SuperLU factors:  Pr A Pc = L U
# ---------------------------------------------------------------------------

def lu_factors(lu):
    """Flatten a SuperLU object into the arrays the solve kernels take."""
    L, U = lu.L.tocsc(), lu.U.tocsc()
    return (L.indptr.astype(np.int64), L.indices.astype(np.int64), L.data,
            U.indptr.astype(np.int64), U.indices.astype(np.int64), U.data,
            lu.perm_r.astype(np.int64), lu.perm_c.astype(np.int64))


def _lu_solve_np(f, b, trans):
    from scipy.sparse import csc_matrix
    from scipy.sparse.linalg import spsolve_triangular

    Lp, Li, Lx, Up, Ui, Ux, pr, pc = f
    n = b.shape[0]
    L = csc_matrix((Lx, Li, Lp), shape=(n, n)).tocsr()
    U = csc_matrix((Ux, Ui, Up), shape=(n, n)).tocsr()
    if not trans:
        z = np.empty(n)
        z[pr] = b
        w = spsolve_triangular(U, spsolve_triangular(L, z, lower=True), lower=False)
        return w[pc]
    w = np.empty(n)
    w[pc] = b
    u = spsolve_triangular(L.T.tocsr(), spsolve_triangular(U.T.tocsr(), w, lower=True), lower=False)
    return u[pr]


@njit(cache=True)
def _lu_solve_nb(f, b, trans):
    Lp, Li, Lx, Up, Ui, Ux, pr, pc = f
    n = b.shape[0]
    v = np.empty(n)
    if not trans:
        for i in range(n):
            v[pr[i]] = b[i]
        for j in range(n):  # L, column oriented, forward
            d = 1.0
            for k in range(Lp[j], Lp[j + 1]):
                if Li[k] == j:
                    d = Lx[k]
            vj = v[j] / d
            v[j] = vj
            if vj != 0.0:
                for k in range(Lp[j], Lp[j + 1]):
                    if Li[k] > j:
                        v[Li[k]] -= Lx[k] * vj
        for j in range(n - 1, -1, -1):  # U, column oriented, backward
            d = 1.0
            for k in range(Up[j], Up[j + 1]):
                if Ui[k] == j:
                    d = Ux[k]
            vj = v[j] / d
            v[j] = vj
            if vj != 0.0:
                for k in range(Up[j], Up[j + 1]):
                    if Ui[k] < j:
                        v[Ui[k]] -= Ux[k] * vj
        out = np.empty(n)
        for i in range(n):
            out[i] = v[pc[i]]
        return out
    for i in range(n):
        v[pc[i]] = b[i]
    for j in range(n):  # U^T forward: row j of U^T is column j of U
        s = v[j]
        d = 1.0
        for k in range(Up[j], Up[j + 1]):
            r = Ui[k]
            if r < j:
                s -= Ux[k] * v[r]
            elif r == j:
                d = Ux[k]
        v[j] = s / d
    for j in range(n - 1, -1, -1):  # L^T backward
        s = v[j]
        d = 1.0
        for k in range(Lp[j], Lp[j + 1]):
            r = Li[k]
            if r > j:
                s -= Lx[k] * v[r]
            elif r == j:
                d = Lx[k]
        v[j] = s / d
    out = np.empty(n)
    for i in range(n):
        out[i] = v[pr[i]]
    return out


# ---------------------------------------------------------------------------
# radial forest screening
# ---------------------------------------------------------------------------

@njit(cache=True)
def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


@njit(cache=True)
def _forest_status_nb(n_nodes, u, v, is_root):
    parent = np.arange(n_nodes)
    for e in range(u.shape[0]):
        a = _find(parent, u[e])
        b = _find(parent, v[e])
        if a == b:
            return FOREST_CYCLE
        parent[a] = b
    roots = np.zeros(n_nodes, dtype=np.int64)
    for i in range(n_nodes):
        if is_root[i]:
            roots[_find(parent, i)] += 1
    for i in range(n_nodes):
        if _find(parent, i) == i and roots[i] != 1:
            return FOREST_ROOTS
    return FOREST_OK


def _forest_status_np(n_nodes, u, v, is_root):
    if n_nodes == 0:
        return FOREST_OK
    g = coo_matrix((np.ones(len(u)), (u, v)), shape=(n_nodes, n_nodes))
    n_comp, label = connected_components(g, directed=False)
    if len(u) != n_nodes - n_comp:
        return FOREST_CYCLE
    per = np.bincount(label[np.asarray(is_root, dtype=bool)], minlength=n_comp)
    if np.any(per != 1):
        return FOREST_ROOTS
    return FOREST_OK


@njit(cache=True)
def _forest_mask_nb(n_nodes, u, v, is_root, subsets):
    out = np.empty(subsets.shape[0], dtype=np.bool_)
    for s in range(subsets.shape[0]):
        sel = subsets[s]
        out[s] = _forest_status_nb(n_nodes, u[sel], v[sel], is_root) == FOREST_OK
    return out


def _forest_mask_np(n_nodes, u, v, is_root, subsets):
    out = np.empty(subsets.shape[0], dtype=bool)
    for s, sel in enumerate(subsets):
        out[s] = _forest_status_np(n_nodes, u[sel], v[sel], is_root) == FOREST_OK
    return out


# ---------------------------------------------------------------------------
# meter series and event bucketing
# ---------------------------------------------------------------------------

def _find_runs_np(x, threshold):
    mask = np.concatenate(([False], x >= threshold, [False]))
    edges = np.flatnonzero(mask[1:] != mask[:-1])
    return edges[0::2].astype(np.int64), edges[1::2].astype(np.int64)


@njit(cache=True)
def _find_runs_nb(x, threshold):
    n = x.shape[0]
    starts = np.empty(n // 2 + 1, dtype=np.int64)
    ends = np.empty(n // 2 + 1, dtype=np.int64)
    k = 0
    inside = False
    for i in range(n):
        hit = x[i] >= threshold
        if hit and not inside:
            starts[k] = i
            inside = True
        elif not hit and inside:
            ends[k] = i
            k += 1
            inside = False
    if inside:
        ends[k] = n
        k += 1
    return starts[:k], ends[:k]


def _minute_power_np(n_minutes, start, duration, power):
    """Per-minute power (kW) from constant-power events; spill past the end is dropped."""
    diff = np.zeros(n_minutes + 1)
    start = np.asarray(start, dtype=np.int64)
    stop = np.minimum(start + np.asarray(duration, dtype=np.int64), n_minutes)
    keep = start < n_minutes
    np.add.at(diff, start[keep], power[keep])
    np.add.at(diff, stop[keep], -power[keep])
    return np.cumsum(diff[:-1])


@njit(cache=True)
def _minute_power_nb(n_minutes, start, duration, power):
    # starts before stops, in the numpy twin's order, so both sum identically
    diff = np.zeros(n_minutes + 1)
    for e in range(start.shape[0]):
        if start[e] < n_minutes:
            diff[start[e]] += power[e]
    for e in range(start.shape[0]):
        if start[e] < n_minutes:
            diff[min(start[e] + duration[e], n_minutes)] -= power[e]
    out = np.empty(n_minutes)
    acc = 0.0
    for i in range(n_minutes):
        acc += diff[i]
        out[i] = acc
    return out


# ---------------------------------------------------------------------------
# Gaussian KDE evaluation
# ---------------------------------------------------------------------------

def _kde_pdf_np(grid, data, bw):
    out = np.empty(grid.shape[0])
    norm = 1.0 / (data.shape[0] * bw * np.sqrt(2.0 * np.pi))
    for lo in range(0, grid.shape[0], 256):
        z = (grid[lo:lo + 256, None] - data[None, :]) / bw
        out[lo:lo + 256] = np.exp(-0.5 * z * z).sum(axis=1) * norm
    return out


@njit(cache=True)
def _kde_pdf_nb(grid, data, bw):
    n = data.shape[0]
    norm = 1.0 / (n * bw * np.sqrt(2.0 * np.pi))
    out = np.empty(grid.shape[0])
    for g in range(grid.shape[0]):
        s = 0.0
        for i in range(n):
            z = (grid[g] - data[i]) / bw
            s += np.exp(-0.5 * z * z)
        out[g] = s * norm
    return out


if USE_NUMBA:
    ratio_test = _ratio_test_nb
    eta_ftran = _eta_ftran_nb
    eta_btran = _eta_btran_nb
    forest_status = _forest_status_nb
    forest_mask = _forest_mask_nb
    find_runs = _find_runs_nb
    minute_power = _minute_power_nb
    kde_pdf = _kde_pdf_nb
    lu_solve = _lu_solve_nb
else:
    ratio_test = _ratio_test_np
    eta_ftran = _eta_ftran_np
    eta_btran = _eta_btran_np
    forest_status = _forest_status_np
    forest_mask = _forest_mask_np
    find_runs = _find_runs_np
    minute_power = _minute_power_np
    kde_pdf = _kde_pdf_np
    lu_solve = _lu_solve_np
