"""Bounded-variable revised primal simplex.

Rows are turned into equalities with one slack per row (``<=`` slacks live in
``[0, inf)``, ``>=`` slacks in ``(-inf, 0]``, ``=`` slacks are fixed at 0), so
the all-slack basis is always a valid starting point.  Feasibility is reached
with a composite phase 1 that minimises the sum of bound violations of the
basic variables; phase 2 then minimises the real objective from the same
basis.  The basis inverse is a sparse LU (SuperLU factors, solved by a compiled
triangular kernel when numba is on) plus product-form eta updates,
refactorised every ``refactor_every`` pivots.

Pricing is Dantzig's rule with a Harris ratio test.  After a run of
degenerate pivots the solver switches to Bland's rule (smallest eligible
index enters, smallest basic index leaves among ties) until it makes progress
again, which rules out cycling.
"""
from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from . import kernels
from ._accel import USE_NUMBA
from .milp import LpArrays, LpSolution, MilpProblem, SolverLimitError, Status

_DEGENERATE_RUN = 40


class BoundedSimplex:
    def __init__(self, arr: LpArrays, *, feas_tol=1e-9, dual_tol=1e-9,
                 piv_tol=1e-9, max_iter=200_000, refactor_every=64):
        m, n = arr.A.shape
        self.m, self.n = m, n
        self.arr = arr
        self.slack_lo = np.where(arr.sense > 0, -np.inf, 0.0)
        self.slack_hi = np.where(arr.sense < 0, np.inf, 0.0)
        self.cost = np.concatenate([arr.c, np.zeros(m)])
        self.A = sparse.hstack([arr.A, sparse.identity(m, format="csr")], format="csc")
        self.AT = self.A.T.tocsr()
        self.b = arr.rhs.astype(float)
        self.feas_tol = feas_tol
        self.dual_tol = dual_tol
        self.piv_tol = piv_tol
        self.max_iter = max_iter
        self.refactor_every = max(1, refactor_every)
        self.iterations = 0

    # -- basis bookkeeping -------------------------------------------------
    def _column(self, j):
        v = np.zeros(self.m)
        s, e = self.A.indptr[j], self.A.indptr[j + 1]
        v[self.A.indices[s:e]] = self.A.data[s:e]
        return v

    def _factor(self):
        B = self.A[:, self.basis]
        self.lu = splu(sparse.csc_matrix(B), permc_spec="COLAMD")
        # SuperLU's own solve carries a large per-call overhead at this size
        self.factors = kernels.lu_factors(self.lu) if USE_NUMBA else None
        self.n_eta = 0

    def _lu_solve(self, v, trans=False):
        if self.factors is not None:
            return kernels.lu_solve(self.factors, v, trans)
        return self.lu.solve(v, trans="T" if trans else "N")

    def _etas(self):
        return self.eta_r, self.eta_piv, self.eta_ptr, self.eta_idx, self.eta_val

    def _push_eta(self, r, alpha):
        k = self.n_eta
        nz = np.flatnonzero(alpha)
        nz = nz[nz != r]
        s = self.eta_ptr[k]
        self.eta_idx[s:s + len(nz)] = nz
        self.eta_val[s:s + len(nz)] = alpha[nz]
        self.eta_ptr[k + 1] = s + len(nz)
        self.eta_r[k] = r
        self.eta_piv[k] = alpha[r]
        self.n_eta = k + 1

    def _ftran(self, v):
        v = self._lu_solve(v)
        if self.n_eta:
            v = kernels.eta_ftran(v, *self._etas(), self.n_eta)
        return v

    def _btran(self, z):
        z = z.copy()
        if self.n_eta:
            z = kernels.eta_btran(z, *self._etas(), self.n_eta)
        return self._lu_solve(z, True)

    def _recompute_xb(self):
        xn = self.x.copy()
        xn[self.basis] = 0.0
        self.x[self.basis] = self._ftran(self.b - self.A @ xn)

    def _start(self, warm):
        m, n = self.m, self.n
        lo, hi = self.lo, self.hi
        at_upper = np.zeros(n + m, dtype=bool)
        if warm is not None:
            basis, at_upper = np.asarray(warm[0], dtype=np.int64), np.asarray(warm[1], dtype=bool)
        else:
            basis = np.arange(n, n + m, dtype=np.int64)
        self.basis = basis.copy()
        self.is_basic = np.zeros(n + m, dtype=bool)
        self.is_basic[self.basis] = True
        x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
        up = at_upper & np.isfinite(hi)
        x[up] = hi[up]
        self.x = x
        k = self.refactor_every
        self.eta_r = np.zeros(k, dtype=np.int64)
        self.eta_piv = np.zeros(k)
        self.eta_ptr = np.zeros(k + 1, dtype=np.int64)
        self.eta_idx = np.zeros(k * m, dtype=np.int64)
        self.eta_val = np.zeros(k * m)
        if m:
            try:
                self._factor()
            except RuntimeError:
                if warm is None:
                    raise
                return self._start(None)
            self._recompute_xb()

    # -- main loop ---------------------------------------------------------
    def solve(self, lo=None, hi=None, warm=None) -> LpSolution:
        """Solve with column bounds ``lo``/``hi`` (defaults: the problem's own)."""
        m, n = self.m, self.n
        arr = self.arr
        self.lo = np.concatenate([arr.lo if lo is None else lo, self.slack_lo])
        self.hi = np.concatenate([arr.hi if hi is None else hi, self.slack_hi])
        self.iterations = 0
        if m == 0:
            return self._solve_unconstrained()
        self._start(warm)
        lo, hi, tol = self.lo, self.hi, self.feas_tol
        bland = False
        degenerate = 0
        while True:
            if self.iterations >= self.max_iter:
                raise SolverLimitError(f"simplex iteration limit {self.max_iter} reached")
            xb = self.x[self.basis]
            lob, hib = lo[self.basis], hi[self.basis]
            below = xb < lob - tol
            above = xb > hib + tol
            phase1 = bool(below.any() or above.any())
            if phase1:
                cb = np.where(below, -1.0, np.where(above, 1.0, 0.0))
                cost = np.zeros(n + m)
            else:
                cb = self.cost[self.basis]
                cost = self.cost
            y = self._btran(cb)
            d = cost - self.AT @ y
            d[self.basis] = 0.0
            x = self.x
            room_up = x < hi - tol
            room_dn = x > lo + tol
            elig = ~self.is_basic & (((d < -self.dual_tol) & room_up) | ((d > self.dual_tol) & room_dn))
            if not elig.any():
                # confirm on a fresh factorisation before giving a verdict
                if self.n_eta:
                    self._factor()
                    self._recompute_xb()
                    continue
                return self._finish(Status.INFEASIBLE if phase1 else Status.OPTIMAL)
            cand = np.flatnonzero(elig)
            if bland:
                q = int(cand[0])
            else:
                q = int(cand[np.argmax(np.abs(d[cand]))])
            sigma = 1.0 if d[q] < 0 else -1.0
            alpha = self._ftran(self._column(q))
            delta = -sigma * alpha
            span = hi[q] - lo[q]
            t_own = span if np.isfinite(span) else np.inf
            t, r, at_up = kernels.ratio_test(xb, lob, hib, delta, self.basis, t_own,
                                             tol, self.piv_tol, bland)
            if not np.isfinite(t):
                if phase1:
                    raise SolverLimitError("phase 1 produced an unbounded ray")
                return self._finish(Status.UNBOUNDED)
            self.iterations += 1
            if t <= 1e-12:
                degenerate += 1
                if degenerate > _DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0
                bland = False
            # move
            self.x[q] += sigma * t
            self.x[self.basis] += t * delta
            if r < 0:
                # bound flip of the entering variable
                self.x[q] = hi[q] if sigma > 0 else lo[q]
                continue
            leaving = self.basis[r]
            self.x[leaving] = hi[leaving] if at_up else lo[leaving]
            self.is_basic[leaving] = False
            self.is_basic[q] = True
            self.basis[r] = q
            if self.n_eta >= self.refactor_every:
                try:
                    self._factor()
                except RuntimeError:
                    # near-singular basis: fall back to the slack basis
                    self._start(None)
                    continue
                self._recompute_xb()
            else:
                self._push_eta(r, alpha)

    def _solve_unconstrained(self):
        c = self.cost
        x = np.where(c > 0, self.lo, np.where(c < 0, self.hi, np.where(np.isfinite(self.lo), self.lo, np.where(np.isfinite(self.hi), self.hi, 0.0))))
        self.x = x
        self.basis = np.zeros(0, dtype=np.int64)
        if not np.all(np.isfinite(x)):
            return LpSolution(Status.UNBOUNDED, iterations=0)
        return self._finish(Status.OPTIMAL)

    def _finish(self, status):
        n = self.n
        if status != Status.OPTIMAL:
            return LpSolution(status, iterations=self.iterations)
        x = self.x[:n].copy()
        # snap to bounds within tolerance
        lo, hi = self.lo[:n], self.hi[:n]
        x = np.minimum(np.maximum(x, lo), hi)
        obj = float(self.arr.c @ x) + self.arr.obj_offset
        at_upper = ~self._basic_mask() & (self.x >= self.hi) & np.isfinite(self.hi)
        return LpSolution(Status.OPTIMAL, x=x, objective=obj, iterations=self.iterations,
                          basis=(self.basis.copy(), at_upper))

    def _basic_mask(self):
        mask = np.zeros(self.n + self.m, dtype=bool)
        mask[self.basis] = True
        return mask


def _solve_highs(arr: LpArrays, lo, hi) -> LpSolution:
    from scipy.optimize import linprog

    le = arr.sense < 0
    ge = arr.sense > 0
    eq = arr.sense == 0
    A_ub = sparse.vstack([arr.A[le], -arr.A[ge]]).tocsr()
    b_ub = np.concatenate([arr.rhs[le], -arr.rhs[ge]])
    res = linprog(arr.c, A_ub=A_ub if A_ub.shape[0] else None, b_ub=b_ub if A_ub.shape[0] else None,
                  A_eq=arr.A[eq] if eq.any() else None, b_eq=arr.rhs[eq] if eq.any() else None,
                  bounds=np.column_stack([lo, hi]), method="highs")
    if res.status == 0:
        x = np.minimum(np.maximum(res.x, lo), hi)
        return LpSolution(Status.OPTIMAL, x=x, objective=float(arr.c @ x) + arr.obj_offset,
                          iterations=int(res.nit))
    if res.status == 2:
        return LpSolution(Status.INFEASIBLE, iterations=int(res.nit))
    if res.status == 3:
        return LpSolution(Status.UNBOUNDED, iterations=int(res.nit))
    raise SolverLimitError(f"HiGHS stopped: {res.message}")


def solve_lp(problem, *, lo=None, hi=None, warm=None, backend="simplex", feas_tol=1e-9,
             max_iter=200_000) -> LpSolution:
    """Solve the LP relaxation of ``problem`` (a MilpProblem or LpArrays).

    ``lo``/``hi`` override the column bounds (used by branch-and-bound);
    ``warm`` is the ``basis`` payload of an earlier solution on the same rows.
    """
    arr = problem.arrays if isinstance(problem, MilpProblem) else problem
    lo = arr.lo if lo is None else lo
    hi = arr.hi if hi is None else hi
    if np.any(lo > hi + feas_tol):
        return LpSolution(Status.INFEASIBLE)
    if backend == "highs":
        return _solve_highs(arr, lo, hi)
    return checked_solve(BoundedSimplex(arr, feas_tol=feas_tol, max_iter=max_iter), lo, hi, warm)


def checked_solve(solver: BoundedSimplex, lo, hi, warm=None) -> LpSolution:
    """``solver.solve`` followed by a substitution check of the returned point."""
    sol = solver.solve(lo, hi, warm)
    if sol.status == Status.OPTIMAL:
        row, col = solver.arr.residuals(sol.x)
        if max(row, col) > 1e-7:
            # drift beyond the reporting tolerance: one cold, tighter re-solve
            cold = BoundedSimplex(solver.arr, feas_tol=solver.feas_tol * 0.1,
                                  max_iter=solver.max_iter, refactor_every=16)
            it = solver.iterations
            sol = cold.solve(lo, hi, None)
            sol.iterations += it
    return sol
