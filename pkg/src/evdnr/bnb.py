"""Best-first branch-and-bound over the bounded simplex.

After each branching the search plunges into the better child until the
dive ends (pruned, infeasible or integral), then returns to the open node
with the lowest bound.  Plunging finds incumbents early; the best-bound pops
close the gap.

Independent blocks of the constraint matrix are solved separately.  Callers
can plug in two hooks:

``lazy(cols, x) -> list[int]``
    Called on every LP-integral point.  Returns global column indices of
    integer variables whose change could repair a violated side condition
    (empty list: the point is acceptable).  If all returned columns are
    already fixed at the node, the node is rejected.
``heuristic(cols, x, relax) -> dict[int, float] | None``
    Proposes values for integer columns; the remaining LP is re-solved with
    those values fixed and, if feasible and accepted by ``lazy``, becomes an
    incumbent.  ``relax(values)`` solves the node LP with a partial fixing
    (global column -> value) and returns ``(x, objective)`` or None, which
    lets the hook run fix-and-resolve schemes.
``brancher(cols, x, lo, hi, relax, objective) -> list[dict[int, float]] | None``
    Called at fractional nodes with the node's block-local bounds.  Returns
    one partial fixing per child; the children must cover every feasible
    integral point of the node (an empty list prunes it).  None falls back
    to the configured variable rule.
"""
from __future__ import annotations

import heapq
import logging
import math
import time

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy import sparse

from .milp import LpArrays, LpSolution, MilpProblem, SolverConfig, SolverLimitError, Status
from .simplex import BoundedSimplex, checked_solve, solve_lp

_HEURISTIC_EVERY = 100

log = logging.getLogger(__name__)


def _blocks(arr: LpArrays):
    m, n = arr.A.shape
    if m == 0:
        return [(np.zeros(0, dtype=int), np.arange(n))]
    pattern = arr.A.copy()
    pattern.data = np.ones_like(pattern.data)
    adj = sparse.bmat([[None, pattern], [pattern.T, None]], format="csr")
    n_comp, label = connected_components(adj, directed=False)
    row_lab, col_lab = label[:m], label[m:]
    out = []
    for k in range(n_comp):
        rows = np.flatnonzero(row_lab == k)
        cols = np.flatnonzero(col_lab == k)
        if len(cols):
            out.append((rows, cols))
    return out


def _sub_arrays(arr: LpArrays, rows, cols) -> LpArrays:
    A = arr.A[rows][:, cols].tocsr()
    return LpArrays(arr.c[cols], A, arr.sense[rows], arr.rhs[rows], arr.lo[cols], arr.hi[cols],
                    arr.integer[cols])


class _LpEngine:
    def __init__(self, arr: LpArrays, backend: str, max_iter: int):
        self.arr = arr
        self.backend = backend
        self.simplex = BoundedSimplex(arr, max_iter=max_iter) if backend == "simplex" else None
        self.iterations = 0

    def solve(self, lo, hi, warm=None) -> LpSolution:
        if np.any(lo > hi):
            return LpSolution(Status.INFEASIBLE)
        if self.simplex is not None:
            sol = checked_solve(self.simplex, lo, hi, warm)
        else:
            sol = solve_lp(self.arr, lo=lo, hi=hi, backend=self.backend)
        self.iterations += sol.iterations
        return sol


def branch_and_bound(problem, cfg: SolverConfig = SolverConfig(), *, lazy=None, heuristic=None,
                     brancher=None, decompose=True, incumbent=None) -> LpSolution:
    """Integral optimum of ``problem`` (MilpProblem or LpArrays).

    Returns status Optimal or Infeasible; when a node or time limit stops the
    search, status is Limit with the best incumbent (if any) and
    ``gap_open=True``.  ``incumbent`` may hold a known feasible point.
    """
    arr = problem.arrays if isinstance(problem, MilpProblem) else problem
    n = arr.A.shape[1]
    t_end = time.monotonic() + cfg.time_limit
    blocks = _blocks(arr) if decompose else [(np.arange(arr.A.shape[0]), np.arange(n))]
    x = np.zeros(n)
    total = arr.obj_offset
    bound = arr.obj_offset
    nodes = iters = 0
    gap_open = False
    for rows, cols in blocks:
        sub = _sub_arrays(arr, rows, cols)
        start = None if incumbent is None else np.asarray(incumbent)[cols]
        res = _solve_block(sub, cols, cfg, lazy, heuristic, brancher, t_end, start)
        nodes += res.nodes
        iters += res.iterations
        if res.status in (Status.INFEASIBLE, Status.UNBOUNDED):
            return LpSolution(res.status, nodes=nodes, iterations=iters)
        if res.status == Status.LIMIT:
            gap_open = True
            if res.x is None:
                return LpSolution(Status.LIMIT, nodes=nodes, iterations=iters, gap_open=True)
        x[cols] = res.x
        total += res.objective
        bound += res.bound
    status = Status.LIMIT if gap_open else Status.OPTIMAL
    return LpSolution(status, x=x, objective=float(arr.c @ x) + arr.obj_offset, nodes=nodes,
                      iterations=iters, gap_open=gap_open, bound=bound)


def _fractionality(x, int_idx):
    v = x[int_idx]
    return np.abs(v - np.round(v))


def _solve_block(arr: LpArrays, cols, cfg: SolverConfig, lazy, heuristic, brancher, t_end, start) -> LpSolution:
    eng = _LpEngine(arr, cfg.lp_backend, cfg.max_lp_iter)
    int_idx = np.flatnonzero(arr.integer)
    lo0, hi0 = arr.lo.copy(), arr.hi.copy()
    tol = cfg.int_tol

    local = {int(g): i for i, g in enumerate(cols)}

    def accept(x):
        """Local indices of repair columns (empty when ``x`` is acceptable)."""
        if lazy is None or not len(int_idx):
            return []
        return [local[int(g)] for g in lazy(cols, x)]

    best_x, best_obj = None, math.inf

    def try_fixing(values: dict, lo, hi):
        """LP with integer columns fixed; returns (x, obj) or None."""
        lo2, hi2 = lo.copy(), hi.copy()
        for j, v in values.items():
            if v < lo[j] - tol or v > hi[j] + tol:
                return None
            lo2[j] = hi2[j] = v
        sol = eng.solve(lo2, hi2)
        if not sol.optimal:
            return None
        if len(int_idx) and _fractionality(sol.x, int_idx).max() > tol:
            return None
        if accept(sol.x):
            return None
        return sol.x, sol.objective

    def offer(cand):
        nonlocal best_x, best_obj
        if cand is not None and cand[1] < best_obj - 1e-9 * max(1.0, abs(cand[1])):
            best_x, best_obj = cand

    if start is not None and len(int_idx):
        offer(try_fixing({int(j): float(round(start[j])) for j in int_idx}, lo0, hi0))

    root = eng.solve(lo0, hi0)
    if root.status != Status.OPTIMAL:
        if root.status == Status.UNBOUNDED and len(int_idx):
            raise SolverLimitError("LP relaxation unbounded; branch-and-bound needs a bounded relaxation")
        return LpSolution(root.status, nodes=1, iterations=eng.iterations)
    if not len(int_idx):
        return LpSolution(Status.OPTIMAL, x=root.x, objective=root.objective, nodes=1,
                          iterations=eng.iterations, bound=root.objective)

    # node = (bound, seq, changes, solution)
    heap = []
    seq = 0
    heapq.heappush(heap, (root.objective, seq, (), root))
    nodes = 1
    hit_limit = False
    global_bound = root.objective

    def bounds_of(changes):
        lo, hi = lo0.copy(), hi0.copy()
        for j, a, b in changes:
            lo[j], hi[j] = a, b
        return lo, hi

    dive = None
    last_heur = 0
    next_log = 0.0
    while heap or dive is not None:
        if dive is not None:
            node_bound, changes, sol = dive
            dive = None
            if node_bound >= best_obj - 1e-9 * max(1.0, abs(best_obj)):
                continue
        else:
            node_bound, _, changes, sol = heapq.heappop(heap)
            global_bound = node_bound
            if node_bound >= best_obj - 1e-9 * max(1.0, abs(best_obj)):
                global_bound = best_obj
                heap.clear()
                break
        if nodes >= cfg.node_limit or time.monotonic() > t_end:
            hit_limit = True
            heapq.heappush(heap, (node_bound, 0, changes, sol))
            break
        if time.monotonic() >= next_log:
            next_log = time.monotonic() + 10.0
            log.debug("nodes %d open %d bound %.6f incumbent %.6f", nodes, len(heap), node_bound, best_obj)
        lo, hi = bounds_of(changes)
        x = sol.x
        frac = _fractionality(x, int_idx)
        probes = 0
        warm = [sol.basis]

        def relax(values, lo=lo, hi=hi):
            # successive probes differ by a few fixings: start from the last optimal basis
            nonlocal probes
            lo2, hi2 = lo.copy(), hi.copy()
            for g, v in values.items():
                j = local[int(g)]
                if v < lo[j] - tol or v > hi[j] + tol:
                    return None
                lo2[j] = hi2[j] = v
            probes += 1
            r = eng.solve(lo2, hi2, warm[0])
            if not r.optimal:
                return None
            warm[0] = r.basis
            return r.x, r.objective

        if heuristic is not None and (nodes == 1 or nodes - last_heur >= _HEURISTIC_EVERY):
            last_heur = nodes
            proposal = heuristic(cols, x, relax)
            if proposal:
                offer(try_fixing({local[int(g)]: float(v) for g, v in proposal.items()}, lo, hi))
        if frac.max() <= tol:
            viol = accept(x)
            if not viol:
                offer((x, sol.objective))
                continue
            free = [j for j in viol if lo[j] < hi[j]]
            if not free:
                continue  # every repair column is fixed: reject the node
            j = int(free[0])
        else:
            # most fractional; ties go to the lowest column index
            k = int(np.argmax(frac))
            j = int(int_idx[k])
        v = x[j]
        fixings = None
        if frac.max() > tol and brancher is not None:
            fixings = brancher(cols, x, lo, hi, relax, sol.objective)
            nodes += probes
        if fixings is not None:
            kids = [tuple((local[int(g)], float(val), float(val)) for g, val in sorted(f.items()))
                    for f in fixings]
        elif frac.max() <= tol:
            # integral but rejected: split the domain of j into {<r}, {r}, {>r}
            r = float(round(v))
            kids = [((j, r, r),)]
            if r - 1 >= lo[j]:
                kids.insert(0, ((j, lo[j], r - 1),))
            if r + 1 <= hi[j]:
                kids.append(((j, r + 1, hi[j]),))
        else:
            kids = [((j, lo[j], math.floor(v)),), ((j, math.ceil(v), hi[j]),)]
        children = []
        for kid in kids:
            child_changes = changes + tuple((jj, float(a), float(b)) for jj, a, b in kid)
            clo, chi = lo.copy(), hi.copy()
            for jj, a, b in kid:
                clo[jj], chi[jj] = a, b
            csol = eng.solve(clo, chi, sol.basis)
            nodes += 1
            if not csol.optimal:
                continue
            if csol.objective >= best_obj - 1e-9 * max(1.0, abs(best_obj)):
                continue
            children.append((csol.objective, child_changes, csol))
        if not children:
            continue
        # plunge into the best child (first on ties), queue the rest
        k_best = min(range(len(children)), key=lambda i: children[i][0])
        dive = children[k_best]
        for i, (obj, ch, cs) in enumerate(children):
            if i != k_best:
                seq += 1
                heapq.heappush(heap, (obj, seq, ch, cs))

    if best_x is None:
        if hit_limit:
            global_bound = min(h[0] for h in heap) if heap else global_bound
            return LpSolution(Status.LIMIT, nodes=nodes, iterations=eng.iterations, gap_open=True,
                              bound=global_bound)
        return LpSolution(Status.INFEASIBLE, nodes=nodes, iterations=eng.iterations)

    # polish: re-solve the continuous part with integers pinned at their rounded values
    pinned = {int(j): float(round(best_x[j])) for j in int_idx}
    polished = try_fixing(pinned, lo0, hi0)
    if polished is not None and polished[1] <= best_obj + 1e-7 * max(1.0, abs(best_obj)):
        best_x, best_obj = polished
    best_x = best_x.copy()
    best_x[int_idx] = np.round(best_x[int_idx])
    status = Status.LIMIT if hit_limit else Status.OPTIMAL
    if hit_limit and heap:
        global_bound = min(h[0] for h in heap)
    return LpSolution(status, x=best_x, objective=best_obj, nodes=nodes, iterations=eng.iterations,
                      gap_open=hit_limit, bound=global_bound if hit_limit else best_obj)
