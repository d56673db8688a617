"""Multi-period DC network MILP: imports, DG, PV curtailment, storage and line switching.

Flow on line k (from-bus i, to-bus j) is ``(angle_i - angle_j) / x_k`` in MW;
``x_k`` already carries the base conversion.  Switchable lines are modelled
with a per-hour binary: an open line carries no flow and its angle coupling is
relaxed by a big-M pair.  Radiality enters the MILP as the per-hour
closed-line count plus, by default, one loop inequality per simple cycle
(substations joined through a virtual root); every incumbent is still
certified by the graph check.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .milp import LinearConstraint, MilpProblem, Relation, SolverConfig, VariableDef
from .network import CaseConfig, NetworkInstance, validate_instance
from .topology import Topology, is_radial_forest, loop_line_sets


class ModelError(ValueError):
    pass


def line_big_m(inst: NetworkInstance, line, cfg: SolverConfig) -> float:
    if cfg.big_m is not None:
        return float(cfg.big_m)
    return line.rating + 2.0 * inst.angle_bound / line.reactance_x


def _angle_buses(inst):
    touched = set()
    for ln in inst.lines:
        touched.add(ln.from_bus)
        touched.add(ln.to_bus)
    return [b for b in inst.bus_ids if b in touched]


def build_model(inst: NetworkInstance, case: CaseConfig, cfg: SolverConfig = SolverConfig()) -> MilpProblem:
    """Assemble the MILP for ``inst`` under configuration ``case``.

    The instance's own ``ev_demand`` is used as the EV load; apply the
    penetration beforehand with :func:`evdnr.network.apply_ev_demand`.
    """
    report = validate_instance(inst)
    if not report.ok:
        raise ModelError(f"invalid instance:\n{report}")
    reconf = case.reconfiguration_enabled
    if not reconf:
        base = is_radial_forest(inst, Topology(inst.base_closed))
        if not base.ok:
            raise ModelError(f"base topology is not radial: {base}")
    if not case.ders_enabled:
        inst = inst.without_ders()

    H = inst.hours
    hours = range(1, H + 1)
    theta_max = inst.angle_bound
    sub_buses = {s.bus for s in inst.substations}
    angle_buses = _angle_buses(inst)
    exact = cfg.bess_binaries == "exact"

    variables = []
    pos = {}

    def add(kind, index, lo, hi, binary=False):
        pos[(kind, index)] = len(variables)
        variables.append(VariableDef(kind, index, float(lo), float(hi), binary))

    switch_lines = [ln for ln in inst.lines if ln.switchable] if reconf else []
    base_closed = inst.base_closed
    for t in hours:
        for b in angle_buses:
            if b in sub_buses:
                add("angle", (b, t), 0.0, 0.0)  # one reference per substation tree
            else:
                add("angle", (b, t), -theta_max, theta_max)
        for ln in inst.lines:
            if not reconf and ln.id not in base_closed:
                add("flow", (ln.id, t), 0.0, 0.0)
            else:
                add("flow", (ln.id, t), -ln.rating, ln.rating)
        for s in inst.substations:
            add("sub", (s.id, t), 0.0, s.import_cap)
        for g in inst.generators:
            add("gen", (g.id, t), g.p_min, g.p_max)
        for p in inst.pv_units:
            add("curt", (p.id, t), 0.0, p.availability_profile[t - 1])
        for b in inst.bess_units:
            add("chg", (b.id, t), 0.0, b.e_cap / b.t_chg)
            add("dchg", (b.id, t), 0.0, b.e_cap / b.t_dchg)
            add("soc", (b.id, t), b.soc_min * b.e_cap, b.soc_max * b.e_cap)
        for ln in switch_lines:
            add("switch", (ln.id, t), 0.0, 1.0, True)
        for b in inst.bess_units:
            add("chg_on", (b.id, t), 0.0, 1.0, exact)
            add("dchg_on", (b.id, t), 0.0, 1.0, exact)

    cons = []

    def con(coeffs, rel, rhs, tag):
        coeffs = tuple((pos[k], float(v)) for k, v in coeffs if v != 0.0)
        cons.append(LinearConstraint(coeffs, rel, float(rhs), tag))

    demand = inst.total_demand
    pv_at = {}
    for p in inst.pv_units:
        pv_at.setdefault(p.bus, []).append(p)
    angle_set = set(angle_buses)
    loops = []
    if switch_lines and cfg.radiality == "loops":
        loops = loop_line_sets(inst)
        if any(not ls for ls in loops):
            raise ModelError("fixed lines alone close a loop; no radial topology exists")
    for t in hours:
        # nodal balance
        for n_i, bus in enumerate(inst.bus_ids):
            terms = []
            for ln in inst.lines:
                if ln.to_bus == bus:
                    terms.append((("flow", (ln.id, t)), 1.0))
                if ln.from_bus == bus:
                    terms.append((("flow", (ln.id, t)), -1.0))
            terms += [(("sub", (s.id, t)), 1.0) for s in inst.substations if s.bus == bus]
            terms += [(("gen", (g.id, t)), 1.0) for g in inst.generators if g.bus == bus]
            terms += [(("curt", (p.id, t)), -1.0) for p in pv_at.get(bus, [])]
            for b in inst.bess_units:
                if b.bus == bus:
                    terms += [(("chg", (b.id, t)), -1.0), (("dchg", (b.id, t)), 1.0)]
            avail = sum(p.availability_profile[t - 1] for p in pv_at.get(bus, []))
            rhs = demand[n_i, t - 1] - avail
            if not terms:
                if abs(rhs) > 0:
                    raise ModelError(f"bus {bus} has demand but nothing can serve it")
                continue
            con(terms, Relation.EQ, rhs, f"balance[n={bus},t={t}]")
        # line flows
        for ln in inst.lines:
            f = ("flow", (ln.id, t))
            dc = [(f, 1.0)]
            if ln.from_bus in angle_set:
                dc.append((("angle", (ln.from_bus, t)), -1.0 / ln.reactance_x))
            if ln.to_bus in angle_set:
                dc.append((("angle", (ln.to_bus, t)), 1.0 / ln.reactance_x))
            if reconf and ln.switchable:
                J = ("switch", (ln.id, t))
                M = line_big_m(inst, ln, cfg)
                con(dc + [(J, M)], Relation.LE, M, f"switch_dc_upper[k={ln.id},t={t}]")
                con(dc + [(J, -M)], Relation.GE, -M, f"switch_dc_lower[k={ln.id},t={t}]")
                con([(f, 1.0), (J, -ln.rating)], Relation.LE, 0.0, f"thermal_upper[k={ln.id},t={t}]")
                con([(f, 1.0), (J, ln.rating)], Relation.GE, 0.0, f"thermal_lower[k={ln.id},t={t}]")
            elif reconf or ln.id in base_closed:
                con(dc, Relation.EQ, 0.0, f"dc_flow[k={ln.id},t={t}]")
        # radiality count
        if switch_lines:
            need = len(inst.buses) - len(inst.substations) - len(inst.fixed_lines)
            if need < 0 or need > len(switch_lines):
                raise ModelError("closed-line count cannot be met by the switchable lines")
            con([(("switch", (ln.id, t)), 1.0) for ln in switch_lines], Relation.EQ, need,
                f"radial_count[t={t}]")
            for c, ls in enumerate(loops):
                con([(("switch", (k, t)), 1.0) for k in sorted(ls)], Relation.LE, len(ls) - 1,
                    f"radial_loop[c={c},t={t}]")
        # storage
        for b in inst.bess_units:
            c_on, d_on = ("chg_on", (b.id, t)), ("dchg_on", (b.id, t))
            ch, dh, e = ("chg", (b.id, t)), ("dchg", (b.id, t)), ("soc", (b.id, t))
            con([(c_on, 1.0), (d_on, 1.0)], Relation.LE, 1.0, f"bess_mode[b={b.id},t={t}]")
            con([(ch, 1.0), (c_on, -b.e_cap / b.t_chg)], Relation.LE, 0.0, f"bess_chg_cap[b={b.id},t={t}]")
            con([(dh, 1.0), (d_on, -b.e_cap / b.t_dchg)], Relation.LE, 0.0, f"bess_dchg_cap[b={b.id},t={t}]")
            step = [(e, 1.0), (ch, -b.eta_chg), (dh, 1.0 / b.eta_dchg)]
            if t == 1:
                con(step, Relation.EQ, b.e_init, f"soc_initial[b={b.id}]")
            else:
                con(step + [(("soc", (b.id, t - 1)), -1.0)], Relation.EQ, 0.0, f"soc_step[b={b.id},t={t}]")
    for b in inst.bess_units:
        con([(("soc", (b.id, H)), 1.0)], Relation.EQ, b.e_init, f"soc_terminal[b={b.id}]")

    objective = []
    for t in hours:
        for s in inst.substations:
            objective.append((pos[("sub", (s.id, t))], s.price_profile[t - 1]))
        for g in inst.generators:
            objective.append((pos[("gen", (g.id, t))], g.cost_profile[t - 1]))
    big_m = {ln.id: line_big_m(inst, ln, cfg) for ln in switch_lines}
    return MilpProblem(variables, cons, objective, big_m, name=f"{inst.name or 'network'}-{case.label}")


# ---------------------------------------------------------------------------
# solved schedule
# ---------------------------------------------------------------------------

@dataclass
class DispatchSchedule:
    hours: int
    sub: dict  # substation id -> MW per hour
    gen: dict
    curt: dict
    chg: dict
    dchg: dict
    soc: dict  # bess id -> MWh at the end of each hour
    e_init: dict
    flow: dict  # line id -> MW per hour
    angle: dict  # bus id -> angle per hour
    closed: dict  # line id -> 0/1 per hour
    cost: float = float("nan")
    exact_binaries: bool = True
    meta: dict = field(default_factory=dict)

    def closed_lines(self, t: int) -> set:
        return {k for k, v in self.closed.items() if v[t - 1] >= 0.5}

    @property
    def e_final(self) -> dict:
        return {b: float(v[-1]) for b, v in self.soc.items()}

    def to_json(self) -> dict:
        ser = lambda d: {str(k): [float(x) for x in v] for k, v in d.items()}  # noqa: E731
        return {
            "hour": list(range(1, self.hours + 1)),
            "substation_mw": ser(self.sub),
            "generator_mw": ser(self.gen),
            "pv_curtailment_mw": ser(self.curt),
            "bess_charge_mw": ser(self.chg),
            "bess_discharge_mw": ser(self.dchg),
            "bess_energy_mwh": ser(self.soc),
            "bess_initial_mwh": {str(k): float(v) for k, v in self.e_init.items()},
            "bess_final_mwh": {str(k): v for k, v in self.e_final.items()},
            "line_flow_mw": ser(self.flow),
            "bus_angle": ser(self.angle),
            "line_closed": {str(k): [int(round(x)) for x in v] for k, v in self.closed.items()},
            "cost_usd": self.cost,
            "exact_binaries": self.exact_binaries,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DispatchSchedule":
        de = lambda d: {int(k): np.asarray(v, dtype=float) for k, v in d.items()}  # noqa: E731
        return cls(
            hours=len(doc["hour"]), sub=de(doc["substation_mw"]), gen=de(doc["generator_mw"]),
            curt=de(doc["pv_curtailment_mw"]), chg=de(doc["bess_charge_mw"]),
            dchg=de(doc["bess_discharge_mw"]), soc=de(doc["bess_energy_mwh"]),
            e_init={int(k): float(v) for k, v in doc["bess_initial_mwh"].items()},
            flow=de(doc["line_flow_mw"]), angle=de(doc["bus_angle"]), closed=de(doc["line_closed"]),
            cost=float(doc["cost_usd"]), exact_binaries=bool(doc.get("exact_binaries", True)),
        )


def operating_cost(inst: NetworkInstance, schedule: DispatchSchedule) -> float:
    """Import plus generation cost of a schedule, evaluated directly from prices."""
    total = 0.0
    for s in inst.substations:
        total += float(np.dot(s.price_profile[: schedule.hours], schedule.sub[s.id]))
    for g in inst.generators:
        if g.id in schedule.gen:
            total += float(np.dot(g.cost_profile[: schedule.hours], schedule.gen[g.id]))
    return total


def extract_schedule(inst: NetworkInstance, case: CaseConfig, problem: MilpProblem, x,
                     cfg: SolverConfig = SolverConfig()) -> DispatchSchedule:
    """Read a solved vector back into per-hour arrays."""
    H = inst.hours
    der = case.ders_enabled

    def series(kind, key):
        return np.array([x[problem.var(kind, key, t)] for t in range(1, H + 1)])

    angle = {}
    for b in inst.bus_ids:
        angle[b] = series("angle", b) if problem.has_var("angle", b, 1) else np.zeros(H)
    closed = {}
    for ln in inst.lines:
        if problem.has_var("switch", ln.id, 1):
            closed[ln.id] = np.round(series("switch", ln.id))
        elif case.reconfiguration_enabled or ln.id in inst.base_closed:
            closed[ln.id] = np.ones(H)
        else:
            closed[ln.id] = np.zeros(H)
    flow = {ln.id: series("flow", ln.id) for ln in inst.lines}
    bess = inst.bess_units if der else ()
    sched = DispatchSchedule(
        hours=H,
        sub={s.id: series("sub", s.id) for s in inst.substations},
        gen={g.id: series("gen", g.id) for g in (inst.generators if der else ())},
        curt={p.id: series("curt", p.id) for p in (inst.pv_units if der else ())},
        chg={b.id: series("chg", b.id) for b in bess},
        dchg={b.id: series("dchg", b.id) for b in bess},
        soc={b.id: series("soc", b.id) for b in bess},
        e_init={b.id: b.e_init for b in bess},
        flow=flow, angle=angle, closed=closed,
        exact_binaries=cfg.bess_binaries == "exact",
    )
    sched.cost = operating_cost(inst, sched)
    return sched
