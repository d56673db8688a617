"""Independent reference computations used by the test-suite.

Nothing here imports the solver paths it is used to check.
"""
import itertools

import numpy as np


def random_bounded_lp(rng, max_vars=6, max_rows=8):
    """Random LP with finite bounds: returns (c, A, sense, rhs, lo, hi)."""
    n = int(rng.integers(1, max_vars + 1))
    m = int(rng.integers(0, max_rows + 1))
    A = rng.integers(-5, 6, size=(m, n)).astype(float)
    A[rng.random((m, n)) < 0.25] = 0.0
    for i in range(m):
        if not A[i].any():
            A[i, rng.integers(n)] = 1.0
    lo = -rng.integers(0, 6, size=n).astype(float)
    hi = rng.integers(0, 6, size=n).astype(float)
    c = rng.integers(-9, 10, size=n).astype(float)
    sense = rng.choice([-1, 0, 1], size=m, p=[0.45, 0.15, 0.40]).astype(np.int8)
    if rng.random() < 0.85:
        x0 = lo + (hi - lo) * rng.random(n)
        ax = A @ x0
        slack = rng.integers(0, 4, size=m)
        rhs = np.where(sense < 0, np.ceil(ax) + slack, np.where(sense > 0, np.floor(ax) - slack, ax))
        rhs = np.round(rhs, 6)
        # equality rows through a rounded point keep numbers tidy
        xr = np.round(x0)
        rhs[sense == 0] = (A @ xr)[sense == 0]
    else:
        rhs = rng.integers(-10, 11, size=m).astype(float)
    return c, A, sense, rhs, lo, hi


def vertex_enumeration(c, A, sense, rhs, lo, hi, tol=1e-9):
    """Minimum of c@x over the polytope by brute force over all bases.

    Returns (objective, x) or (None, None) when the polytope is empty.
    The polytope must be bounded (finite lo/hi).
    """
    n = len(c)
    eq_rows = [(A[i], rhs[i]) for i in range(len(rhs)) if sense[i] == 0]
    ineq = []
    for i in range(len(rhs)):
        if sense[i] < 0:
            ineq.append((A[i], rhs[i]))
        elif sense[i] > 0:
            ineq.append((-A[i], -rhs[i]))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        ineq.append((e, hi[j]))
        ineq.append((-e, -lo[j]))
    G = np.array([g for g, _ in ineq])
    h = np.array([v for _, v in ineq])
    E = np.array([g for g, _ in eq_rows]).reshape(-1, n)
    f = np.array([v for _, v in eq_rows])
    E_all, f_all = E, f
    keep = []
    for i in range(E.shape[0]):
        if np.linalg.matrix_rank(E[keep + [i]]) == len(keep) + 1:
            keep.append(i)
    E, f = E[keep].reshape(-1, n), f[keep]
    k = n - E.shape[0]
    if k < 0:
        # overdetermined equalities: solve least squares and check
        x, *_ = np.linalg.lstsq(E, f, rcond=None)
        ok = np.allclose(E @ x, f, atol=1e-7) and np.all(G @ x <= h + 1e-7)
        return (float(c @ x), x) if ok else (None, None)
    if k == 0:
        combos = np.zeros((1, 0), dtype=int)
    else:
        combos = np.array(list(itertools.combinations(range(G.shape[0]), k)), dtype=int)
    M = np.concatenate([np.broadcast_to(E, (len(combos),) + E.shape), G[combos]], axis=1)
    r = np.concatenate([np.broadcast_to(f, (len(combos), len(f))), h[combos]], axis=1)
    det = np.linalg.det(M)
    good = np.abs(det) > 1e-9
    if not good.any():
        return None, None
    X = np.linalg.solve(M[good], r[good][..., None])[..., 0]
    feas = np.all(X @ G.T <= h + 1e-7, axis=1)
    if E_all.shape[0]:
        feas &= np.all(np.abs(X @ E_all.T - f_all) <= 1e-7, axis=1)
    if not feas.any():
        return None, None
    vals = X[feas] @ c
    i = int(np.argmin(vals))
    return float(vals[i]), X[feas][i]


def radial_by_dfs(n, edges, roots):
    """Forest check by depth-first search: acyclic, and one root per tree.

    ``edges`` are (u, v) pairs over nodes ``0..n-1``; parallel edges count
    as a cycle.
    """
    adj = [[] for _ in range(n)]
    for e, (u, v) in enumerate(edges):
        adj[u].append((v, e))
        adj[v].append((u, e))
    seen = [False] * n
    for s in range(n):
        if seen[s]:
            continue
        seen[s] = True
        stack, comp = [(s, -1)], [s]
        while stack:
            u, via = stack.pop()
            for w, e in adj[u]:
                if e == via:
                    continue
                if seen[w]:
                    return False
                seen[w] = True
                comp.append(w)
                stack.append((w, e))
        if sum(1 for b in comp if b in roots) != 1:
            return False
    return True


def milp_brute_force(c, A, sense, rhs, lo, hi, integer):
    """Minimum over every integer assignment, continuous part by HiGHS.

    Integer columns must have small finite bounds.  Returns the objective or
    None when infeasible.
    """
    from scipy.optimize import linprog

    c, A = np.asarray(c, float), np.asarray(A, float)
    int_cols = np.flatnonzero(integer)
    ranges = [range(int(np.ceil(lo[j])), int(np.floor(hi[j])) + 1) for j in int_cols]
    best = None
    for combo in itertools.product(*ranges):
        l, u = np.array(lo, float), np.array(hi, float)
        l[int_cols] = combo
        u[int_cols] = combo
        A_ub = np.vstack([A[sense < 0], -A[sense > 0]]) if len(rhs) else None
        b_ub = np.concatenate([rhs[sense < 0], -rhs[sense > 0]]) if len(rhs) else None
        A_eq = A[sense == 0] if np.any(sense == 0) else None
        b_eq = rhs[sense == 0] if np.any(sense == 0) else None
        if A_ub is not None and A_ub.shape[0] == 0:
            A_ub = b_ub = None
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=list(zip(l, u)), method="highs")
        if res.status == 0 and (best is None or res.fun < best):
            best = float(res.fun)
    return best
