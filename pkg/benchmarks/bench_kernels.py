"""Time each hot kernel in its numba and numpy versions.

Usage::

    python benchmarks/bench_kernels.py [--repeat N]

Both versions are imported side by side, so ``EVDNR_DISABLE_NUMBA`` does
not matter here.  The first numba call (compilation) is excluded.
"""
import argparse
import time

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from evdnr import kernels as K


def _cases(rng):
    m = 400
    xb = rng.normal(size=m)
    lob = np.where(rng.random(m) < 0.2, -np.inf, xb - rng.random(m))
    hib = np.where(rng.random(m) < 0.2, np.inf, xb + rng.random(m))
    delta = rng.normal(size=m)
    basis = rng.permutation(3 * m)[:m].astype(np.int64)
    yield "ratio_test", K._ratio_test_np, K._ratio_test_nb, (xb, lob, hib, delta, basis, np.inf, 1e-9, 1e-9,
                                                              False)

    k = 40
    r = rng.integers(0, m, k).astype(np.int64)
    piv = rng.uniform(0.5, 2.0, k)
    nnz = rng.integers(0, 20, k)
    ptr = np.concatenate([[0], np.cumsum(nnz)]).astype(np.int64)
    idx = rng.integers(0, m, ptr[-1]).astype(np.int64)
    val = rng.normal(size=ptr[-1])
    v = rng.normal(size=m)
    yield "eta_ftran", K._eta_ftran_np, K._eta_ftran_nb, (v, r, piv, ptr, idx, val, k)
    yield "eta_btran", K._eta_btran_np, K._eta_btran_nb, (v, r, piv, ptr, idx, val, k)

    n = 1500
    A = sparse.random(n, n, density=0.003, random_state=rng) + sparse.eye(n) * 3.0
    f = K.lu_factors(splu(sparse.csc_matrix(A)))
    b = rng.normal(size=n)
    yield "lu_solve", K._lu_solve_np, K._lu_solve_nb, (f, b, False)

    nodes, e = 33, 37
    u = rng.integers(0, nodes, e).astype(np.int64)
    w = (u + rng.integers(1, nodes, e)) % nodes
    is_root = np.zeros(nodes, bool)
    is_root[:2] = True
    subsets = rng.random((500, e)) < 0.85
    yield "forest_status", K._forest_status_np, K._forest_status_nb, (nodes, u, w.astype(np.int64), is_root)
    yield "forest_mask", K._forest_mask_np, K._forest_mask_nb, (nodes, u, w.astype(np.int64), is_root, subsets)

    x = np.where(rng.random(525_600) < 0.05, 7.0, 0.3)
    yield "find_runs", K._find_runs_np, K._find_runs_nb, (x, 2.0)

    s = rng.integers(0, 525_600, 20_000).astype(np.int64)
    d = rng.integers(10, 600, 20_000).astype(np.int64)
    p = rng.uniform(1, 11, 20_000)
    yield "minute_power", K._minute_power_np, K._minute_power_nb, (525_600, s, d, p)

    grid = np.linspace(0, 1440, 2000)
    data = rng.uniform(0, 1440, 3000)
    yield "kde_pdf", K._kde_pdf_np, K._kde_pdf_nb, (grid, data, 40.0)


def _time(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    print(f"{'kernel':<14} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for name, f_np, f_nb, fargs in _cases(np.random.default_rng(args.seed)):
        f_nb(*fargs)  # compile
        t_np, t_nb = _time(f_np, fargs, args.repeat), _time(f_nb, fargs, args.repeat)
        print(f"{name:<14} {t_np * 1e3:>10.3f} {t_nb * 1e3:>10.3f} {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
