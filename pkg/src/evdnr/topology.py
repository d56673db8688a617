"""Radiality checks: a closed-line set must form a forest with one substation per tree."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import networkx as nx
import numpy as np

from . import kernels
from .network import NetworkInstance

DEFAULT_ENUM_CAP = 12


class EnumerationCapError(ValueError):
    pass


@dataclass(frozen=True)
class Topology:
    closed_lines: frozenset
    hour: Optional[int] = None

    def is_closed(self, line_id) -> bool:
        return line_id in self.closed_lines


@dataclass
class RadialityResult:
    ok: bool
    failures: list = field(default_factory=list)  # (condition, detail) pairs

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "radial forest"
        return "; ".join(f"{c}: {d}" for c, d in self.failures)

    @property
    def conditions(self) -> set:
        return {c for c, _ in self.failures}


def _graph(inst: NetworkInstance, closed) -> nx.MultiGraph:
    g = nx.MultiGraph()
    g.add_nodes_from(inst.bus_ids)
    for ln in inst.lines:
        if ln.id in closed:
            g.add_edge(ln.from_bus, ln.to_bus, key=ln.id)
    return g


def is_radial_forest(inst: NetworkInstance, topo: Topology) -> RadialityResult:
    """Count, acyclicity and one-substation-per-tree checks on ``topo``."""
    closed = set(topo.closed_lines)
    known = {ln.id for ln in inst.lines}
    failures = []
    bad = sorted(closed - known)
    if bad:
        return RadialityResult(False, [("unknown-lines", f"lines {bad} are not in the instance")])
    fixed_open = sorted(ln.id for ln in inst.lines if not ln.switchable and ln.id not in closed)
    if fixed_open:
        failures.append(("fixed-line-open", f"non-switchable lines {fixed_open} are open"))
    need = len(inst.buses) - len(inst.substations)
    if len(closed) != need:
        failures.append(("count", f"{len(closed)} closed lines, need buses - substations = {need}"))
    g = _graph(inst, closed)
    try:
        cycle = nx.find_cycle(g)
        lines_in_cycle = sorted(k for _, _, k in cycle)
        failures.append(("cycle", f"closed lines {lines_in_cycle} form a cycle"))
    except nx.NetworkXNoCycle:
        pass
    sub_buses = [s.bus for s in inst.substations]
    for comp in nx.connected_components(g):
        subs = sorted(b for b in sub_buses if b in comp)
        if len(subs) == 0:
            failures.append(("unsupplied", f"buses {sorted(comp)} reach no substation"))
        elif len(subs) > 1:
            failures.append(("shared-tree", f"substation buses {subs} share one tree"))
    return RadialityResult(not failures, failures)


def offending_lines(inst: NetworkInstance, closed) -> list:
    """Closed switchable lines whose opening could repair a non-radial topology.

    Lines on a cycle, or on the path joining two substations of one tree.
    Empty when the topology is already a radial forest.
    """
    g = _graph(inst, closed)
    switchable = {ln.id for ln in inst.lines if ln.switchable}
    out = []
    try:
        cycle = nx.find_cycle(g)
        out = [k for _, _, k in cycle]
    except nx.NetworkXNoCycle:
        sub_buses = [s.bus for s in inst.substations]
        for comp in nx.connected_components(g):
            subs = [b for b in sub_buses if b in comp]
            if len(subs) > 1:
                path = nx.shortest_path(nx.Graph(g.subgraph(comp)), subs[0], subs[1])
                for a, b in zip(path, path[1:]):
                    out.extend(g[a][b].keys())
                break
    return sorted(k for k in set(out) if k in switchable)


_ROOT = "__root__"


def loop_line_sets(inst: NetworkInstance) -> list:
    """Switchable-line sets of every simple cycle once substations share a virtual root.

    A closed-line set with the forest count is a radial forest iff none of
    these sets is fully closed.  Only inclusion-minimal sets are returned,
    sorted; a cycle made only of fixed lines yields an empty set.
    """
    g = nx.Graph()
    between = {}
    for ln in inst.lines:
        g.add_edge(ln.from_bus, ln.to_bus)
        between.setdefault(frozenset((ln.from_bus, ln.to_bus)), []).append(ln)
    for sb in inst.substations:
        g.add_edge(_ROOT, sb.bus)
    sets = set()
    for group in between.values():
        for a, b in itertools.combinations(group, 2):
            sets.add(frozenset(ln.id for ln in (a, b) if ln.switchable))
    for cyc in nx.simple_cycles(g):
        hops = [frozenset((u, v)) for u, v in zip(cyc, cyc[1:] + cyc[:1])]
        if any(_ROOT in h for h in hops) and sum(_ROOT in h for h in hops) != 2:
            continue
        options = [between[h] for h in hops if _ROOT not in h]
        for combo in itertools.product(*options):
            sets.add(frozenset(ln.id for ln in combo if ln.switchable))
    minimal = [x for x in sets if not any(y < x for y in sets)]
    return sorted(minimal, key=lambda x: (len(x), sorted(x)))


class _ForestScreen:
    """Vectorised radial screening of many closed-line sets."""

    def __init__(self, inst: NetworkInstance):
        idx = inst.bus_index
        self.n = len(inst.buses)
        self.line_ids = [ln.id for ln in inst.lines]
        self.u = np.array([idx[ln.from_bus] for ln in inst.lines], dtype=np.int64)
        self.v = np.array([idx[ln.to_bus] for ln in inst.lines], dtype=np.int64)
        self.is_root = np.zeros(self.n, dtype=np.bool_)
        for s in inst.substations:
            self.is_root[idx[s.bus]] = True

    def mask(self, subsets: np.ndarray) -> np.ndarray:
        if subsets.shape[0] == 0:
            return np.zeros(0, dtype=bool)
        return kernels.forest_mask(self.n, self.u, self.v, self.is_root, subsets)


def enumerate_radial_topologies(inst: NetworkInstance, cap: int = DEFAULT_ENUM_CAP) -> list:
    """All radial forests reachable by choosing which switchable lines are closed.

    Non-switchable lines are always closed.  Results are ordered
    lexicographically by their sorted closed-line ids.
    """
    sw = sorted(ln.id for ln in inst.lines if ln.switchable)
    if len(sw) > cap:
        raise EnumerationCapError(
            f"{len(sw)} switchable lines exceed the enumeration cap of {cap} (2^{len(sw)} subsets)")
    fixed = [ln.id for ln in inst.lines if not ln.switchable]
    k = len(inst.buses) - len(inst.substations) - len(fixed)
    if k < 0 or k > len(sw):
        return []
    pos = {lid: i for i, lid in enumerate(ln.id for ln in inst.lines)}
    combos = list(itertools.combinations(sw, k))
    subsets = np.zeros((len(combos), len(inst.lines)), dtype=np.bool_)
    for lid in fixed:
        subsets[:, pos[lid]] = True
    for r, combo in enumerate(combos):
        for lid in combo:
            subsets[r, pos[lid]] = True
    ok = _ForestScreen(inst).mask(subsets)
    topos = [frozenset(fixed) | frozenset(c) for c, good in zip(combos, ok) if good]
    topos.sort(key=lambda s: tuple(sorted(s)))
    return [Topology(t) for t in topos]


@dataclass
class ScheduleRadiality:
    hours: dict  # hour -> RadialityResult

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.hours.values())

    def failures(self) -> dict:
        return {t: str(r) for t, r in self.hours.items() if not r.ok}


def assert_schedule_radial(inst: NetworkInstance, schedule) -> ScheduleRadiality:
    """Per-hour radial check of the closed-line sets recorded in ``schedule``."""
    out = {}
    for t in range(1, getattr(schedule, "hours", inst.hours) + 1):
        out[t] = is_radial_forest(inst, Topology(frozenset(schedule.closed_lines(t)), hour=t))
    return ScheduleRadiality(out)


def injection_ranges(inst: NetworkInstance, t: int, ders: bool = True) -> tuple:
    """Per-bus bounds on net injection (supply minus demand) in hour ``t``."""
    d = inst.total_demand[:, t - 1]
    lo = {b: -float(d[i]) for i, b in enumerate(inst.bus_ids)}
    hi = dict(lo)
    for s in inst.substations:
        hi[s.bus] += s.import_cap
    if ders:
        for g in inst.generators:
            lo[g.bus] += g.p_min
            hi[g.bus] += g.p_max
        for p in inst.pv_units:
            hi[p.bus] += p.availability_profile[t - 1]  # curtailment can take it to zero
        for b in inst.bess_units:
            lo[b.bus] -= b.e_cap / b.t_chg
            hi[b.bus] += b.e_cap / b.t_dchg
    return lo, hi


def dispatch_signature(inst: NetworkInstance, closed, lo: dict, hi: dict) -> tuple:
    """What a radial topology imposes on the dispatch of one hour.

    On a tree every line carries the net injection of the side away from the
    substation, so the feasible dispatch depends only on which buses share a
    substation and on the (bus set, rating) pairs of lines whose rating the
    injection bounds ``lo``/``hi`` can reach.  Two topologies with equal
    signatures admit exactly the same dispatches.
    """
    g = nx.Graph()
    g.add_nodes_from(inst.bus_ids)
    lines = {ln.id: ln for ln in inst.lines}
    for k in closed:
        g.add_edge(lines[k].from_bus, lines[k].to_bus)
    subs = {s.bus for s in inst.substations}
    part = frozenset(frozenset(c) for c in nx.connected_components(g))
    binding = set()
    for k in closed:
        ln = lines[k]
        g.remove_edge(ln.from_bus, ln.to_bus)
        side = nx.node_connected_component(g, ln.to_bus)
        if side & subs:
            side = nx.node_connected_component(g, ln.from_bus)
        g.add_edge(ln.from_bus, ln.to_bus)
        if sum(hi[b] for b in side) > ln.rating or sum(lo[b] for b in side) < -ln.rating:
            binding.add((frozenset(side), ln.rating))
    return part, frozenset(binding)
