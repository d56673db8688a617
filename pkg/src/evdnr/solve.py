"""Case-level solving, the enumeration oracle, and schedule verification."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .bnb import branch_and_bound
from .milp import MilpProblem, SolverConfig, SolverLimitError, Status
from .model import DispatchSchedule, build_model, extract_schedule, operating_cost
from .network import CaseConfig, NetworkInstance, apply_ev_demand
from .topology import (DEFAULT_ENUM_CAP, Topology, assert_schedule_radial, dispatch_signature,
                       enumerate_radial_topologies, injection_ranges, offending_lines)

log = logging.getLogger(__name__)

BALANCE_TOL = 1e-6
FLOW_TOL = 1e-6
SOC_TOL = 1e-9
BOUND_TOL = 1e-6


class SolverFailure(RuntimeError):
    """The solver stopped without a verdict, or produced a schedule that fails verification."""


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    worst: float = 0.0
    detail: str = ""


@dataclass
class VerificationReport:
    checks: list
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name) -> Check:
        return next(c for c in self.checks if c.name == name)

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "checks": {c.name: {"passed": c.passed, "worst_residual": c.worst, "detail": c.detail}
                       for c in self.checks},
            "warnings": list(self.warnings),
        }

    def __str__(self):
        lines = [f"{'PASS' if c.passed else 'FAIL'} {c.name} (worst {c.worst:.3g}) {c.detail}".rstrip()
                 for c in self.checks]
        lines += [f"WARN {w}" for w in self.warnings]
        return "\n".join(lines)


def _worst(name, residuals, tol, describe):
    """Check from a list of (residual, label) pairs."""
    if not residuals:
        return Check(name, True, 0.0)
    r, label = max(residuals, key=lambda p: p[0])
    return Check(name, bool(r <= tol), float(r), "" if r <= tol else describe(label))


def verify_schedule(inst: NetworkInstance, schedule: DispatchSchedule) -> VerificationReport:
    """Replay every network and storage constraint on a schedule.

    ``inst`` must carry the same EV load the schedule was solved with.  DER
    units absent from the schedule are treated as excluded from the case.
    """
    H = schedule.hours
    bidx = inst.bus_index
    demand = inst.total_demand[:, :H]
    pv = [p for p in inst.pv_units if p.id in schedule.curt]
    gens = [g for g in inst.generators if g.id in schedule.gen]
    bess = [b for b in inst.bess_units if b.id in schedule.chg]
    checks, warnings = [], []

    # nodal balance
    net = -demand.copy()
    for ln in inst.lines:
        f = schedule.flow[ln.id]
        net[bidx[ln.to_bus]] += f
        net[bidx[ln.from_bus]] -= f
    for s in inst.substations:
        net[bidx[s.bus]] += schedule.sub[s.id]
    for g in gens:
        net[bidx[g.bus]] += schedule.gen[g.id]
    for p in pv:
        net[bidx[p.bus]] += np.asarray(p.availability_profile[:H]) - schedule.curt[p.id]
    for b in bess:
        net[bidx[b.bus]] += schedule.dchg[b.id] - schedule.chg[b.id]
    res = [(abs(net[i, t]), (inst.bus_ids[i], t + 1)) for i in range(len(inst.buses)) for t in range(H)]
    checks.append(_worst("nodal_balance", res, BALANCE_TOL, lambda l: f"bus {l[0]} hour {l[1]}"))

    # flows: rating, angle consistency on closed lines, zero on open lines
    rating, dc, open_flow = [], [], []
    for ln in inst.lines:
        f = schedule.flow[ln.id]
        closed = schedule.closed[ln.id]
        th_f, th_t = schedule.angle[ln.from_bus], schedule.angle[ln.to_bus]
        for t in range(H):
            rating.append((abs(f[t]) - ln.rating, (ln.id, t + 1)))
            if closed[t] >= 0.5:
                dc.append((abs(f[t] - (th_f[t] - th_t[t]) / ln.reactance_x), (ln.id, t + 1)))
            else:
                open_flow.append((abs(f[t]), (ln.id, t + 1)))
    checks.append(_worst("line_rating", rating, FLOW_TOL, lambda l: f"line {l[0]} hour {l[1]} over rating"))
    checks.append(_worst("dc_flow", dc, FLOW_TOL, lambda l: f"line {l[0]} hour {l[1]} flow != angle diff / x"))
    checks.append(_worst("open_line_flow", open_flow, FLOW_TOL,
                         lambda l: f"open line {l[0]} carries flow in hour {l[1]}"))

    # device bounds
    bounds = []

    def within(values, lo, hi, label):
        v = np.asarray(values)
        lo_v = np.broadcast_to(lo, v.shape)
        hi_v = np.broadcast_to(hi, v.shape)
        viol = np.maximum(lo_v - v, v - hi_v)
        t = int(np.argmax(viol))
        bounds.append((float(viol[t]), (label, t + 1)))

    for s in inst.substations:
        within(schedule.sub[s.id], 0.0, s.import_cap, f"substation {s.id}")
    for g in gens:
        within(schedule.gen[g.id], g.p_min, g.p_max, f"generator {g.id}")
    for p in pv:
        within(schedule.curt[p.id], 0.0, np.asarray(p.availability_profile[:H]), f"pv {p.id} curtailment")
    for b in bess:
        within(schedule.chg[b.id], 0.0, b.e_cap / b.t_chg, f"bess {b.id} charge")
        within(schedule.dchg[b.id], 0.0, b.e_cap / b.t_dchg, f"bess {b.id} discharge")
        within(schedule.soc[b.id], b.soc_min * b.e_cap, b.soc_max * b.e_cap, f"bess {b.id} energy")
    checks.append(_worst("device_bounds", bounds, BOUND_TOL, lambda l: f"{l[0]} hour {l[1]}"))

    # storage replay and terminal condition
    replay, terminal, exclusive = [], [], []
    for b in bess:
        e = b.e_init
        stored = schedule.soc[b.id]
        chg, dchg = schedule.chg[b.id], schedule.dchg[b.id]
        for t in range(H):
            e = e + b.eta_chg * chg[t] - dchg[t] / b.eta_dchg
            replay.append((abs(e - stored[t]), (b.id, t + 1)))
            both = min(chg[t], dchg[t])
            exclusive.append((both, (b.id, t + 1)))
            if not schedule.exact_binaries and both > BOUND_TOL and b.eta_chg * b.eta_dchg < 1:
                warnings.append(f"bess {b.id} hour {t + 1}: simultaneous charge/discharge "
                                f"({chg[t]:.4g}/{dchg[t]:.4g} MW) under relaxed binaries")
        terminal.append((abs(stored[-1] - b.e_init), (b.id, H)))
        terminal.append((abs(schedule.e_init.get(b.id, b.e_init) - b.e_init), (b.id, 0)))
    checks.append(_worst("soc_replay", replay, SOC_TOL, lambda l: f"bess {l[0]} hour {l[1]}"))
    checks.append(_worst("soc_terminal", terminal, SOC_TOL, lambda l: f"bess {l[0]} final != initial"))
    if schedule.exact_binaries:
        checks.append(_worst("charge_exclusive", exclusive, BOUND_TOL,
                             lambda l: f"bess {l[0]} charges and discharges in hour {l[1]}"))

    rad = assert_schedule_radial(inst, schedule)
    checks.append(Check("radiality", bool(rad.ok), float(len(rad.failures())),
                        "; ".join(f"hour {t}: {m}" for t, m in rad.failures().items())))

    cost = operating_cost(inst, schedule)
    gap = abs(cost - schedule.cost) / max(1.0, abs(cost))
    checks.append(Check("cost", bool(gap <= 1e-6), float(gap), "" if gap <= 1e-6 else f"recorded {schedule.cost}, replay {cost}"))
    return VerificationReport(checks, warnings)


# ---------------------------------------------------------------------------
# case results
# ---------------------------------------------------------------------------

@dataclass
class CaseResult:
    case: CaseConfig
    status: str  # Feasible | Infeasible | Limit
    cost: Optional[float] = None
    schedule: Optional[DispatchSchedule] = None
    verification: Optional[VerificationReport] = None
    nodes: int = 0
    lp_iterations: int = 0
    wall_ms: float = 0.0
    bound: Optional[float] = None
    solver: str = "bnb"

    @property
    def feasible(self) -> bool:
        return self.status == "Feasible"

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "config": self.case.label,
            "penetration": self.case.penetration,
            "cost_usd": self.cost,
            "bound_usd": self.bound,
            "schedule": self.schedule.to_json() if self.schedule is not None else None,
            "verification": self.verification.to_json() if self.verification is not None else None,
            "stats": {"nodes": self.nodes, "lp_iterations": self.lp_iterations, "wall_ms": self.wall_ms,
                      "solver": self.solver},
        }


def effective_instance(inst: NetworkInstance, case: CaseConfig, ev_profile=None) -> NetworkInstance:
    if ev_profile is None:
        return inst
    return apply_ev_demand(inst, ev_profile, case.penetration)


class _Hooks:
    """Radiality certification and rounding heuristic for one built model."""

    def __init__(self, inst: NetworkInstance, problem: MilpProblem):
        self.inst = inst
        self.switch_col = {}
        self.col_line = {}
        self.bess_cols = []
        self._hour_of = {}
        for j, v in enumerate(problem.variables):
            if v.kind == "switch":
                line, t = v.index
                self.switch_col[(line, t)] = j
                self.col_line[j] = (line, t)
        self.hours = sorted({t for _, t in self.switch_col})
        self.ders = any(v.kind in ("gen", "curt", "chg") for v in problem.variables)
        self.sw_lines = sorted({k for k, _ in self.switch_col})
        self.fixed = [ln for ln in inst.lines if not ln.switchable]
        self.need = len(inst.buses) - len(inst.substations) - len(self.fixed)
        for b in inst.bess_units:
            for t in range(1, inst.hours + 1):
                if problem.has_var("chg_on", b.id, t) and problem.variables[problem.var("chg_on", b.id, t)].binary:
                    self.bess_cols.append((problem.var("chg", b.id, t), problem.var("dchg", b.id, t),
                                           problem.var("chg_on", b.id, t), problem.var("dchg_on", b.id, t)))
                    self._hour_of[problem.var("chg_on", b.id, t)] = t

    def _hours_in(self, pos):
        return [t for t in self.hours if all((k, t) in self.switch_col and self.switch_col[(k, t)] in pos
                                             for k in self.sw_lines)]

    def lazy(self, cols, x):
        pos = {int(c): i for i, c in enumerate(cols)}
        repair = []
        for t in self._hours_in(pos):
            closed = {ln.id for ln in self.fixed}
            closed |= {k for k in self.sw_lines if x[pos[self.switch_col[(k, t)]]] > 0.5}
            bad = offending_lines(self.inst, closed)
            if bad or not _radial(self.inst, closed):
                if not bad:
                    bad = sorted(k for k in closed if k in self.sw_lines)
                repair += [self.switch_col[(k, t)] for k in bad]
        return repair

    def _topologies(self):
        if not hasattr(self, "_topo_cache"):
            try:
                topos = [sorted(tp.closed_lines & set(self.sw_lines))
                         for tp in enumerate_radial_topologies(self.inst, max(DEFAULT_ENUM_CAP, len(self.sw_lines)))]
            except ValueError:
                topos = None
            self._topo_cache = topos
        return self._topo_cache

    def branch(self, cols, x, lo, hi, relax, obj):
        """Branch on the whole topology of the hour whose rounding costs most.

        Each hour with fractional switches is probed with its radial switch
        sets, nearest first; an hour where some set keeps the node objective
        is degenerate and skipped.  The hour with the largest least increase
        becomes the branching hour, one child per feasible switch set.  With
        no such hour the most fractional hour is split over all its sets.
        A single binary split rarely moves the bound here because the LP
        re-routes through the other switches of the same hour.
        """
        topos = self._topologies()
        if topos is None:
            return None
        pos = {int(c): i for i, c in enumerate(cols)}
        val = lambda k, t: x[pos[self.switch_col[(k, t)]]]  # noqa: E731
        frac = {t: sum(min(val(k, t), 1.0 - val(k, t)) for k in self.sw_lines) for t in self._hours_in(pos)}
        frac = {t: f for t, f in frac.items() if f > 1e-6}
        if not frac:
            return None
        tol = 1e-9 * max(1.0, abs(obj))

        def fixing(t, cand):
            fix = {}
            for k in self.sw_lines:
                g = self.switch_col[(k, t)]
                v = 1.0 if k in cand else 0.0
                if v < lo[pos[g]] or v > hi[pos[g]]:
                    return None
                fix[g] = v
            return fix

        def fixings(t):
            # one compatible member per class of dispatch-equivalent topologies
            dist = lambda c: sum(1.0 - val(k, t) if k in c else val(k, t) for k in self.sw_lines)  # noqa: E731
            out = []
            for members in self._classes(t):
                for cand in sorted(members, key=lambda c: (dist(c), c)):
                    fix = fixing(t, cand)
                    if fix is not None:
                        out.append((dist(cand), cand, fix))
                        break
            return [f for _, _, f in sorted(out, key=lambda e: (e[0], e[1]))]

        best = None  # (least increase, hour, feasible fixings)
        for t in sorted(frac, key=lambda t: (-frac[t], t)):
            live, least = [], math.inf
            for fix in fixings(t):
                r = relax(fix)
                if r is None:
                    continue
                live.append(fix)
                least = min(least, r[1] - obj)
                if least <= tol:
                    break
            if not live:
                return []  # no radial set of this hour is feasible: prune
            if least > tol and (best is None or least > best[0]):
                best = (least, t, live)
        if best is not None:
            return best[2]
        return fixings(max(frac, key=lambda t: (frac[t], -t)))

    def _classes(self, t):
        """Radial switch sets of hour ``t`` grouped by dispatch signature."""
        cache = self.__dict__.setdefault("_class_cache", {})
        if t not in cache and self.inst.angle_limit is not None:
            # a finite angle limit can bind, so the signature is no longer exact
            cache[t] = [[cand] for cand in self._topologies()]
        if t not in cache:
            lo, hi = injection_ranges(self.inst, t, self.ders)
            fixed = {ln.id for ln in self.fixed}
            groups = {}
            for cand in self._topologies():
                key = dispatch_signature(self.inst, fixed | set(cand), lo, hi)
                groups.setdefault(key, []).append(cand)
            cache[t] = list(groups.values())
        return cache[t]

    def _hour_candidates(self, t, val):
        """Radial switch sets for hour ``t``, closest to the values ``val`` first."""
        topos = self._topologies()
        if topos is None:
            order = sorted(self.sw_lines, key=lambda k: (-val(k), k))
            chosen = _greedy_forest(self.inst, self.fixed, order, self.need)
            return [] if chosen is None else [sorted(chosen)]
        dist = lambda c: sum(1.0 - val(k) if k in c else val(k) for k in self.sw_lines)  # noqa: E731
        return sorted(topos, key=lambda c: (dist(c), c))

    def _trials(self, fixed, t, topo, quads, variants):
        for cand in topo:
            for var in variants:
                trial = dict(fixed)
                for (_, _, c_on, d_on), dis in zip(quads, var):
                    trial[c_on] = 0.0 if dis else 1.0
                    trial[d_on] = 1.0 if dis else 0.0
                if cand is not None:
                    for k in self.sw_lines:
                        trial[self.switch_col[(k, t)]] = 1.0 if k in cand else 0.0
                yield trial

    def heuristic(self, cols, x, relax=None):
        """Relax-and-fix by hour: fix one hour's switches and storage modes, re-solve, repeat.

        Each hour tries the topologies closest to the current LP values and a
        few storage-mode variants; the first fixing that keeps the LP
        objective is taken, otherwise the cheapest feasible one.
        """
        pos = {int(c): i for i, c in enumerate(cols)}
        hours = self._hours_in(pos)
        bess_by_hour = {}
        for quad in self.bess_cols:
            if all(c in pos for c in quad):
                bess_by_hour.setdefault(self._hour_of[quad[2]], []).append(quad)
        if not hours and not bess_by_hour:
            return None
        fixed = {}
        cur, cur_obj = x, None
        if relax is not None:
            base = relax({})
            cur_obj = None if base is None else base[1]
        def frac_of(t):
            f = sum(min(v, 1.0 - v) for v in (x[pos[self.switch_col[(k, t)]]] for k in self.sw_lines)) \
                if t in hours else 0.0
            return f + sum(min(x[pos[q[2]]], 1.0 - x[pos[q[2]]]) for q in bess_by_hour.get(t, []))

        # most fractional hours first: the others are usually degenerate in the topology
        for t in sorted(set(hours) | set(bess_by_hour), key=lambda t: (-round(frac_of(t), 9), t)):
            quads = bess_by_hour.get(t, [])
            prefer = [cur[pos[dh]] > 1e-9 and cur[pos[dh]] > cur[pos[ch]] for ch, dh, _, _ in quads]
            ambiguous = [i for i, (ch, dh, _, _) in enumerate(quads) if min(cur[pos[ch]], cur[pos[dh]]) > 1e-9]
            variants = [prefer] + [[p != (i == j) for i, p in enumerate(prefer)] for j in ambiguous]
            if ambiguous:
                variants.append([not p if i in ambiguous else p for i, p in enumerate(prefer)])
            ranked = [None]
            if t in hours:
                val = lambda k: cur[pos[self.switch_col[(k, t)]]]  # noqa: E731
                ranked = self._hour_candidates(t, val)
            best = None  # (objective, fixing, x)
            for trial in self._trials(fixed, t, ranked[:6], quads, variants):
                if relax is None:
                    best = (None, trial, cur)
                    break
                res = relax(trial)
                if res is None:
                    continue
                if best is None or res[1] < best[0]:
                    best = (res[1], trial, res[0])
                if cur_obj is None or res[1] <= cur_obj + 1e-9 * max(1.0, abs(cur_obj)):
                    break
            if best is None:
                return None
            cur_obj, fixed, cur = best
        return fixed or None


def _radial(inst, closed) -> bool:
    from .topology import is_radial_forest

    return is_radial_forest(inst, Topology(frozenset(closed))).ok


def _greedy_forest(inst, fixed, order, need):
    """Add switchable lines in ``order`` while keeping one substation per tree."""
    parent = {b: b for b in inst.bus_ids}
    has_sub = {b: False for b in inst.bus_ids}
    for s in inst.substations:
        has_sub[s.bus] = True

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra == rb or (has_sub[ra] and has_sub[rb]):
            return False
        parent[ra] = rb
        has_sub[rb] = has_sub[rb] or has_sub[ra]
        return True

    for ln in fixed:
        if not union(ln.from_bus, ln.to_bus):
            return None
    lines = {ln.id: ln for ln in inst.lines}
    chosen = set()
    for k in order:
        if len(chosen) == need:
            break
        ln = lines[k]
        if union(ln.from_bus, ln.to_bus):
            chosen.add(k)
    return chosen if len(chosen) == need else None


def solve_case(inst: NetworkInstance, case: CaseConfig, cfg: SolverConfig = SolverConfig(), *,
               ev_profile=None) -> CaseResult:
    """Build and solve one configuration; the result is verified before it is returned.

    ``ev_profile`` (the 100% reference) is scaled by ``case.penetration``;
    without it the instance's own EV load is used as-is.
    """
    t0 = time.perf_counter()
    eff = effective_instance(inst, case, ev_profile)
    problem = build_model(eff, case, cfg)
    hooks = _Hooks(eff, problem)
    lazy = hooks.lazy if hooks.switch_col else None
    heur = hooks.heuristic if (hooks.switch_col or hooks.bess_cols) else None
    brancher = hooks.branch if hooks.switch_col and cfg.branching == "hour-topology" else None
    sol = branch_and_bound(problem, cfg, lazy=lazy, heuristic=heur, brancher=brancher)
    wall = (time.perf_counter() - t0) * 1e3
    if sol.status in (Status.INFEASIBLE,):
        return CaseResult(case, "Infeasible", nodes=sol.nodes, lp_iterations=sol.iterations, wall_ms=wall)
    if sol.status == Status.UNBOUNDED:
        raise SolverFailure("model unbounded; instance data are inconsistent")
    if sol.x is None:
        return CaseResult(case, "Limit", nodes=sol.nodes, lp_iterations=sol.iterations, wall_ms=wall,
                          bound=sol.bound)
    schedule = extract_schedule(eff, case, problem, sol.x, cfg)
    report = verify_schedule(eff, schedule)
    if not report.ok:
        raise SolverFailure(f"solver schedule failed verification:\n{report}")
    gap = abs(schedule.cost - sol.objective) / max(1.0, abs(sol.objective))
    if gap > 1e-6:
        raise SolverFailure(f"objective {sol.objective} disagrees with schedule cost {schedule.cost}")
    status = "Limit" if sol.gap_open else "Feasible"
    return CaseResult(case, status, cost=schedule.cost, schedule=schedule, verification=report,
                      nodes=sol.nodes, lp_iterations=sol.iterations, wall_ms=wall, bound=sol.bound)


# ---------------------------------------------------------------------------
# enumeration oracle
# ---------------------------------------------------------------------------

def _tree_dispatch(inst: NetworkInstance, closed, t, use_ders):
    """Cheapest dispatch for hour ``t`` on a radial forest, via tree flows.

    Returns (cost, sub, gen, curt, flow) dicts or None if infeasible.
    Line flows are linear in the injections, so the hour is a small LP in the
    device outputs only; angles are recovered afterwards.
    """
    buses = inst.bus_ids
    bidx = inst.bus_index
    nb = len(buses)
    gens = inst.generators if use_ders else ()
    pvs = inst.pv_units if use_ders else ()
    subs = inst.substations
    nvar = len(subs) + len(gens) + len(pvs)
    # injection at bus n = const[n] + E[n] @ z
    E = np.zeros((nb, nvar))
    const = -inst.total_demand[:, t - 1].copy()
    lo, hi, cost = [], [], []
    col = 0
    for s in subs:
        E[bidx[s.bus], col] = 1.0
        lo.append(0.0)
        hi.append(s.import_cap)
        cost.append(s.price_profile[t - 1])
        col += 1
    for g in gens:
        E[bidx[g.bus], col] = 1.0
        lo.append(g.p_min)
        hi.append(g.p_max)
        cost.append(g.cost_profile[t - 1])
        col += 1
    for p in pvs:
        avail = p.availability_profile[t - 1]
        const[bidx[p.bus]] += avail
        E[bidx[p.bus], col] = -1.0
        lo.append(0.0)
        hi.append(avail)
        cost.append(0.0)
        col += 1

    # orient each tree away from its substation
    adj = {b: [] for b in buses}
    lines = {ln.id: ln for ln in inst.lines}
    for k in closed:
        ln = lines[k]
        adj[ln.from_bus].append((ln.to_bus, k))
        adj[ln.to_bus].append((ln.from_bus, k))
    parent_line, order = {}, []
    for s in subs:
        stack = [s.bus]
        seen = {s.bus}
        while stack:
            b = stack.pop()
            order.append((b, s.id))
            for nb_bus, k in adj[b]:
                if nb_bus not in seen:
                    seen.add(nb_bus)
                    parent_line[nb_bus] = (b, k)
                    stack.append(nb_bus)
    # subtree injection sums, leaves first
    sub_E = {b: E[bidx[b]].copy() for b in buses}
    sub_c = {b: const[bidx[b]] for b in buses}
    for b, _ in reversed(order):
        if b in parent_line:
            p, _k = parent_line[b]
            sub_E[p] += sub_E[b]
            sub_c[p] += sub_c[b]
    A_eq, b_eq, A_ub, b_ub = [], [], [], []
    for s in subs:
        A_eq.append(sub_E[s.bus])
        b_eq.append(-sub_c[s.bus])
    # flow on the line into child b (towards b) = -(subtree injection of b)
    line_expr = {}
    for b, (p, k) in parent_line.items():
        ln = lines[k]
        sign = 1.0 if ln.to_bus == b else -1.0  # flow measured from->to
        coef, c0 = -sign * sub_E[b], -sign * sub_c[b]
        line_expr[k] = (coef, c0)
        A_ub.append(coef)
        b_ub.append(ln.rating - c0)
        A_ub.append(-coef)
        b_ub.append(ln.rating + c0)
    res = linprog(np.array(cost), A_ub=np.array(A_ub).reshape(-1, nvar) if A_ub else None,
                  b_ub=np.array(b_ub) if b_ub else None, A_eq=np.array(A_eq).reshape(-1, nvar),
                  b_eq=np.array(b_eq), bounds=list(zip(lo, hi)), method="highs")
    if res.status == 2:
        return None
    if res.status != 0:
        raise SolverFailure(f"hourly LP failed: {res.message}")
    z = res.x
    sub = {s.id: float(z[i]) for i, s in enumerate(subs)}
    gen = {g.id: float(z[len(subs) + i]) for i, g in enumerate(gens)}
    curt = {p.id: float(z[len(subs) + len(gens) + i]) for i, p in enumerate(pvs)}
    flow = {k: 0.0 for k in lines}
    for k, (coef, c0) in line_expr.items():
        flow[k] = float(coef @ z + c0)
    angle = {b: 0.0 for b in buses}
    for b, _ in order:
        if b in parent_line:
            p, k = parent_line[b]
            ln = lines[k]
            f = flow[k]
            # f = (angle_from - angle_to) / x
            angle[b] = angle[p] - f * ln.reactance_x if ln.from_bus == p else angle[p] + f * ln.reactance_x
    return float(np.dot(cost, z)), sub, gen, curt, flow, angle


def solve_by_enumeration(inst: NetworkInstance, case: CaseConfig, cfg: SolverConfig = SolverConfig(), *,
                         ev_profile=None, cap: int = DEFAULT_ENUM_CAP) -> CaseResult:
    """Exact optimum for storage-free cases: per hour, best radial topology.

    Without storage the hours decouple, so each hour is an LP per candidate
    topology.  Ties keep the lexicographically smallest closed-line set.
    """
    t0 = time.perf_counter()
    eff = effective_instance(inst, case, ev_profile)
    if case.ders_enabled and eff.bess_units:
        raise ValueError("enumeration oracle is only valid without storage (hours must decouple)")
    if case.reconfiguration_enabled:
        topos = [tp.closed_lines for tp in enumerate_radial_topologies(eff, cap)]
    else:
        topos = [eff.base_closed]
    H = eff.hours
    theta_max = eff.angle_bound
    use_ders = case.ders_enabled
    lines = [ln.id for ln in eff.lines]
    sched = DispatchSchedule(
        hours=H,
        sub={s.id: np.zeros(H) for s in eff.substations},
        gen={g.id: np.zeros(H) for g in (eff.generators if use_ders else ())},
        curt={p.id: np.zeros(H) for p in (eff.pv_units if use_ders else ())},
        chg={}, dchg={}, soc={}, e_init={},
        flow={k: np.zeros(H) for k in lines},
        angle={b: np.zeros(H) for b in eff.bus_ids},
        closed={k: np.zeros(H) for k in lines},
        exact_binaries=True,
    )
    n_lp = 0
    for t in range(1, H + 1):
        best, best_topo = None, None
        for closed in topos:
            n_lp += 1
            out = _tree_dispatch(eff, closed, t, use_ders)
            if out is None:
                continue
            if best is None or out[0] < best[0] - 1e-9 * max(1.0, abs(best[0])):
                best, best_topo = out, closed
        if best is None:
            wall = (time.perf_counter() - t0) * 1e3
            return CaseResult(case, "Infeasible", lp_iterations=n_lp, wall_ms=wall, solver="enum")
        _, sub, gen, curt, flow, angle = best
        if max(abs(a) for a in angle.values()) > theta_max + 1e-9:
            raise SolverFailure("angle limit binds; the tree-flow oracle does not model it")
        for s, v in sub.items():
            sched.sub[s][t - 1] = v
        for g, v in gen.items():
            sched.gen[g][t - 1] = v
        for p, v in curt.items():
            sched.curt[p][t - 1] = v
        for k, v in flow.items():
            sched.flow[k][t - 1] = v
        for b, v in angle.items():
            sched.angle[b][t - 1] = v
        for k in best_topo:
            sched.closed[k][t - 1] = 1.0
    sched.cost = operating_cost(eff, sched)
    report = verify_schedule(eff, sched)
    wall = (time.perf_counter() - t0) * 1e3
    return CaseResult(case, "Feasible", cost=sched.cost, schedule=sched, verification=report,
                      lp_iterations=n_lp, wall_ms=wall, solver="enum")


# ---------------------------------------------------------------------------
# big-M probe
# ---------------------------------------------------------------------------

@dataclass
class ProbeHour:
    hour: int
    feasible: bool
    flow: float = math.nan
    angle_flow: float = math.nan  # (theta_from - theta_to) / x at the solution

    @property
    def residual(self) -> float:
        """|flow| when the line is forced open, |flow - angle_flow| when forced closed."""
        return abs(self.flow) if math.isnan(self.angle_flow) else abs(self.flow - self.angle_flow)


def _fixed_problem(problem: MilpProblem, line_id: int, value: int, hours) -> MilpProblem:
    vs = list(problem.variables)
    for t in hours:
        j = problem.var("switch", line_id, t)
        v = vs[j]
        vs[j] = type(v)(v.kind, v.index, float(value), float(value), v.binary)
    return MilpProblem(vs, problem.constraints, problem.objective, problem.big_m, problem.name)


def probe_big_m(inst: NetworkInstance, case: CaseConfig, line_id: int, value: int,
                cfg: SolverConfig = SolverConfig(), *, ev_profile=None) -> list:
    """Force ``J[line_id, t] = value`` and report the resulting flow per hour.

    All hours are forced together first; if that is infeasible each hour is
    forced on its own, so an hour where the forced state admits no radial
    dispatch shows up as ``feasible=False`` instead of hiding the others.
    """
    if not case.reconfiguration_enabled:
        raise ValueError("big-M probing needs a reconfiguration case")
    eff = effective_instance(inst, case, ev_profile)
    problem = build_model(eff, case, cfg)
    ln = eff.line(line_id)
    if not ln.switchable:
        raise ValueError(f"line {line_id} is not switchable")
    hours = list(range(1, eff.hours + 1))

    def run(fixed_hours):
        p = _fixed_problem(problem, line_id, value, fixed_hours)
        hooks = _Hooks(eff, p)
        sol = branch_and_bound(p, cfg, lazy=hooks.lazy, heuristic=hooks.heuristic)
        if sol.status == Status.INFEASIBLE:
            return None
        if sol.x is None:
            raise SolverFailure(f"probe on line {line_id} hit a solver limit")
        return sol.x

    def read(x, t):
        f = float(x[problem.var("flow", line_id, t)])
        if not value:
            return ProbeHour(t, True, f)
        th = lambda b: float(x[problem.var("angle", b, t)]) if problem.has_var("angle", b, t) else 0.0  # noqa: E731
        return ProbeHour(t, True, f, (th(ln.from_bus) - th(ln.to_bus)) / ln.reactance_x)

    x = run(hours)
    if x is not None:
        return [read(x, t) for t in hours]
    out = []
    for t in hours:
        xt = run([t])
        out.append(read(xt, t) if xt is not None else ProbeHour(t, False))
    return out
