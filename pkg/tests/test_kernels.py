"""Every numba kernel against its numpy twin."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse
from scipy.integrate import trapezoid
from scipy.sparse.linalg import splu

from evdnr import kernels as K

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=200, deadline=None)
@given(seeds, st.booleans())
def test_ratio_test_pair(seed, bland):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 12))
    lob = np.where(rng.random(m) < 0.2, -np.inf, rng.integers(-3, 1, m).astype(float))
    hib = np.where(rng.random(m) < 0.2, np.inf, rng.integers(0, 4, m).astype(float))
    xb = rng.integers(-4, 5, m).astype(float)
    delta = rng.integers(-3, 4, m) * rng.random(m)
    basis = rng.permutation(3 * m)[:m].astype(np.int64)
    t_own = float(rng.choice([np.inf, rng.random() * 5]))
    args = (xb, lob, hib, delta, basis, t_own, 1e-9, 1e-9, bland)
    a, b = K._ratio_test_np(*args), K._ratio_test_nb(*args)
    assert a[1] == b[1]
    assert a[0] == pytest.approx(b[0], rel=1e-12, abs=1e-15)
    assert bool(a[2]) == bool(b[2])


def _random_etas(rng, m, k):
    r = rng.integers(0, m, k).astype(np.int64)
    piv = rng.uniform(0.5, 2.0, k) * rng.choice([-1, 1], k)
    ptr, idx, val = [0], [], []
    for j in range(k):
        rows = [i for i in rng.choice(m, size=int(rng.integers(0, m)), replace=False) if i != r[j]]
        idx += rows
        val += list(rng.normal(size=len(rows)))
        ptr.append(len(idx))
    return (r, piv, np.array(ptr, np.int64), np.array(idx, np.int64), np.array(val, float))


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_eta_pairs(seed):
    rng = np.random.default_rng(seed)
    m, k = int(rng.integers(1, 10)), int(rng.integers(0, 6))
    etas = _random_etas(rng, m, k)
    v = rng.normal(size=m)
    np.testing.assert_allclose(K._eta_ftran_np(v.copy(), *etas, k), K._eta_ftran_nb(v.copy(), *etas, k),
                               rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(K._eta_btran_np(v.copy(), *etas, k), K._eta_btran_nb(v.copy(), *etas, k),
                               rtol=1e-12, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(seeds, st.booleans())
def test_lu_solve_pair_matches_superlu(seed, trans):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 25))
    A = sparse.random(n, n, density=0.2, random_state=rng) + sparse.eye(n) * 3.0
    lu = splu(sparse.csc_matrix(A))
    f = K.lu_factors(lu)
    b = rng.normal(size=n)
    ref = lu.solve(b, trans="T" if trans else "N")
    np.testing.assert_allclose(K._lu_solve_np(f, b, trans), ref, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(K._lu_solve_nb(f, b, trans), ref, rtol=1e-10, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_forest_pairs(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 12))
    e = int(rng.integers(0, 2 * n))
    u = rng.integers(0, n, e).astype(np.int64)
    v = rng.integers(0, n, e).astype(np.int64)
    keep = u != v
    u, v = u[keep], v[keep]
    is_root = rng.random(n) < 0.3
    assert K._forest_status_np(n, u, v, is_root) == K._forest_status_nb(n, u, v, is_root)
    subsets = rng.random((5, u.size)) < 0.5
    np.testing.assert_array_equal(K._forest_mask_np(n, u, v, is_root, subsets),
                                  K._forest_mask_nb(n, u, v, is_root, subsets))


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_find_runs_pair(seed):
    rng = np.random.default_rng(seed)
    x = rng.choice([0.0, 1.0, 2.0, 5.0], size=int(rng.integers(0, 60)))
    for a, b in zip(K._find_runs_np(x, 2.0), K._find_runs_nb(x, 2.0)):
        np.testing.assert_array_equal(a, b)


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_minute_power_pair(seed):
    rng = np.random.default_rng(seed)
    n, e = int(rng.integers(1, 300)), int(rng.integers(0, 20))
    start = rng.integers(0, n + 20, e).astype(np.int64)
    dur = rng.integers(1, 200, e).astype(np.int64)
    power = rng.uniform(0, 11, e)
    a = K._minute_power_np(n, start, dur, power)
    np.testing.assert_allclose(a, K._minute_power_nb(n, start, dur, power), rtol=1e-12, atol=1e-9)
    # energy inside the window is conserved
    inside = np.minimum(start + dur, n) - np.minimum(start, n)
    assert a.sum() == pytest.approx(float(inside @ power), rel=1e-12, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_kde_pdf_pair(seed):
    rng = np.random.default_rng(seed)
    data = rng.normal(size=int(rng.integers(1, 300)))
    grid = np.linspace(-4, 4, int(rng.integers(1, 600)))
    bw = float(rng.uniform(0.05, 2.0))
    np.testing.assert_allclose(K._kde_pdf_np(grid, data, bw), K._kde_pdf_nb(grid, data, bw),
                               rtol=1e-12, atol=1e-15)


def test_kde_pdf_integrates_to_one():
    data = np.array([-1.0, 0.0, 2.5])
    grid = np.linspace(-12, 14, 20001)
    assert trapezoid(K.kde_pdf(grid, data, 0.7), grid) == pytest.approx(1.0, abs=1e-8)


def test_bound_names_follow_backend():
    from evdnr._accel import USE_NUMBA

    assert (K.ratio_test is K._ratio_test_nb) == USE_NUMBA
    assert (K.lu_solve is K._lu_solve_nb) == USE_NUMBA
