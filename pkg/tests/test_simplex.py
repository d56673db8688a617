import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from evdnr.milp import Status
from evdnr.simplex import BoundedSimplex, solve_lp

from _oracles import random_bounded_lp, vertex_enumeration
from conftest import make_arrays


@pytest.mark.parametrize("seed", range(40))
def test_matches_vertex_enumeration(seed):
    c, A, sense, rhs, lo, hi = random_bounded_lp(np.random.default_rng(seed))
    ref, _ = vertex_enumeration(c, A, sense, rhs, lo, hi)
    sol = solve_lp(make_arrays(c, A, sense, rhs, lo, hi))
    if ref is None:
        assert sol.status == Status.INFEASIBLE
    else:
        assert sol.status == Status.OPTIMAL
        assert abs(sol.objective - ref) <= 1e-8 * max(1.0, abs(ref))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_optimal_point_is_feasible_and_matches_highs(seed):
    c, A, sense, rhs, lo, hi = random_bounded_lp(np.random.default_rng(seed))
    arr = make_arrays(c, A, sense, rhs, lo, hi)
    sol = solve_lp(arr)
    ref = solve_lp(arr, backend="highs")
    assert sol.status == ref.status
    if sol.optimal:
        row, col = arr.residuals(sol.x)
        assert max(row, col) <= 1e-9
        assert sol.objective == pytest.approx(ref.objective, rel=1e-8, abs=1e-8)


def test_beale_cycling_example_terminates():
    # classic degenerate LP that cycles under Dantzig pricing without safeguards
    c = [-0.75, 150.0, -0.02, 6.0]
    A = [[0.25, -60.0, -0.04, 9.0],
         [0.5, -90.0, -0.02, 3.0],
         [0.0, 0.0, 1.0, 0.0]]
    arr = make_arrays(c, A, [-1, -1, -1], [0.0, 0.0, 1.0], [0] * 4, [np.inf] * 4)
    sol = solve_lp(arr, max_iter=500)
    assert sol.status == Status.OPTIMAL
    assert sol.objective == pytest.approx(-0.05, abs=1e-12)


def test_unbounded_and_infeasible():
    arr = make_arrays([-1.0, 0.0], [[1.0, -1.0]], [-1], [0.0], [0, 0], [np.inf, np.inf])
    assert solve_lp(arr).status == Status.UNBOUNDED
    arr = make_arrays([1.0], [[1.0]], [1], [5.0], [0], [2])
    assert solve_lp(arr).status == Status.INFEASIBLE


def test_free_variables_and_equalities():
    # min 2x + y  s.t. x + y = 3, x - y >= -1, x, y free
    arr = make_arrays([2.0, 1.0], [[1, 1], [1, -1]], [0, 1], [3.0, -1.0], [-np.inf] * 2, [np.inf] * 2)
    sol = solve_lp(arr)
    ref = linprog([2, 1], A_ub=[[-1, 1]], b_ub=[1], A_eq=[[1, 1]], b_eq=[3], bounds=[(None, None)] * 2)
    assert sol.objective == pytest.approx(ref.fun, abs=1e-10)
    assert sol.objective == pytest.approx(4.0, abs=1e-10)


def test_warm_start_after_bound_change_agrees_with_cold():
    rng = np.random.default_rng(7)
    for _ in range(20):
        c, A, sense, rhs, lo, hi = random_bounded_lp(rng)
        arr = make_arrays(c, A, sense, rhs, lo, hi)
        solver = BoundedSimplex(arr)
        first = solver.solve(arr.lo, arr.hi)
        if not first.optimal:
            continue
        j = int(rng.integers(arr.c.size))
        lo2, hi2 = arr.lo.copy(), arr.hi.copy()
        hi2[j] = np.floor(first.x[j])
        lo2[j] = min(lo2[j], hi2[j])
        warm = BoundedSimplex(arr).solve(lo2, hi2, first.basis)
        cold = BoundedSimplex(arr).solve(lo2, hi2)
        assert warm.status == cold.status
        if cold.optimal:
            assert warm.objective == pytest.approx(cold.objective, abs=1e-8)
