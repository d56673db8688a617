import itertools
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evdnr.network import Line, load_instance
from evdnr.solve import _tree_dispatch
from evdnr.topology import (EnumerationCapError, Topology, assert_schedule_radial, dispatch_signature,
                            enumerate_radial_topologies, injection_ranges, is_radial_forest,
                            loop_line_sets, offending_lines)

from _oracles import radial_by_dfs
from test_network import one_bus_doc


def _closed_all(inst):
    return frozenset(ln.id for ln in inst.lines if ln.id <= 32)


def test_all_original_lines_closed_fails_count(fixture_instance):
    res = is_radial_forest(fixture_instance, Topology(_closed_all(fixture_instance)))
    assert not res.ok
    assert "count" in res.conditions and "shared-tree" in res.conditions


def test_one_path_line_opened_gives_two_trees(fixture_instance):
    # line 25 (bus 25-26 side) splits the feeder into one tree per substation
    closed = _closed_all(fixture_instance) - {25}
    res = is_radial_forest(fixture_instance, Topology(closed))
    assert res.ok, str(res)
    assert len(closed) == 33 - 2


def test_one_bus_instance():
    inst = load_instance(one_bus_doc())
    assert is_radial_forest(inst, Topology(frozenset())).ok
    assert [t.closed_lines for t in enumerate_radial_topologies(inst)] == [frozenset()]


def _ring(n_bus, switchable):
    doc = one_bus_doc()
    doc["buses"] = [{"id": i, "name": f"b{i}", "load_profile": [0.1] * 24} for i in range(1, n_bus + 1)]
    doc["lines"] = [{"id": i, "from_bus": i, "to_bus": i % n_bus + 1, "reactance_x": 0.1, "rating": 1.0,
                     "switchable": switchable} for i in range(1, n_bus + 1)]
    return load_instance(doc)


def test_zero_switchable_lines():
    ring = _ring(4, False)
    assert enumerate_radial_topologies(ring) == []
    path = replace(ring, lines=ring.lines[:-1])
    assert [t.closed_lines for t in enumerate_radial_topologies(path)] == [frozenset({1, 2, 3})]


def test_ring_enumeration_opens_each_line_once():
    topos = enumerate_radial_topologies(_ring(5, True))
    assert [sorted(set(range(1, 6)) - t.closed_lines) for t in topos] == [[5], [4], [3], [2], [1]]


def test_cap_is_enforced(fixture_instance):
    with pytest.raises(EnumerationCapError, match="cap"):
        enumerate_radial_topologies(fixture_instance, cap=3)


def _brute_force(inst):
    idx = inst.bus_index
    roots = {idx[s.bus] for s in inst.substations}
    fixed = [ln for ln in inst.lines if not ln.switchable]
    sw = [ln for ln in inst.lines if ln.switchable]
    out = []
    for mask in range(2 ** len(sw)):
        chosen = fixed + [ln for i, ln in enumerate(sw) if mask >> i & 1]
        if radial_by_dfs(len(inst.buses), [(idx[ln.from_bus], idx[ln.to_bus]) for ln in chosen], roots):
            out.append(frozenset(ln.id for ln in chosen))
    return sorted(out, key=lambda s: tuple(sorted(s)))


def test_fixture_enumeration_matches_brute_force(fixture_instance):
    topos = enumerate_radial_topologies(fixture_instance)
    assert [t.closed_lines for t in topos] == _brute_force(fixture_instance)
    # frozen regression baseline for the bundled switchable set
    assert len(topos) == 76
    for t in topos:
        assert is_radial_forest(fixture_instance, t).ok
        assert len(t.closed_lines) == 33 - 2


def test_loop_sets_characterise_radiality(fixture_instance):
    inst = fixture_instance
    loops = loop_line_sets(inst)
    fixed = {ln.id for ln in inst.lines if not ln.switchable}
    sw = sorted(ln.id for ln in inst.lines if ln.switchable)
    radial = {t.closed_lines for t in enumerate_radial_topologies(inst)}
    for combo in itertools.combinations(sw, 31 - len(fixed)):
        closed = fixed | set(combo)
        no_loop = not any(s <= closed for s in loops)
        assert no_loop == (frozenset(closed) in radial)


def test_offending_lines(fixture_instance):
    closed = set(_closed_all(fixture_instance)) | {33}
    bad = offending_lines(fixture_instance, closed)
    assert bad and all(fixture_instance.line(k).switchable for k in bad)
    assert offending_lines(fixture_instance, _closed_all(fixture_instance) - {25}) == []


def _random_graph(rng):
    n = int(rng.integers(1, 9))
    n_sub = int(rng.integers(1, min(n, 3) + 1))
    e = int(rng.integers(0, min(2 * n, 12) + 1))
    edges = [tuple(rng.choice(n, 2, replace=False)) for _ in range(e)] if n > 1 else []
    return n, edges, set(range(n_sub))


def _doc_from(n, edges, roots):
    doc = one_bus_doc()
    doc["buses"] = [{"id": i + 1, "name": f"b{i}", "load_profile": [0.0] * 24} for i in range(n)]
    doc["lines"] = [{"id": k + 1, "from_bus": int(u) + 1, "to_bus": int(v) + 1, "reactance_x": 0.1,
                     "rating": 1.0, "switchable": True} for k, (u, v) in enumerate(edges)]
    doc["substations"] = [{"id": r + 1, "bus": r + 1, "price_profile": [1.0] * 24, "import_cap": 1.0}
                          for r in sorted(roots)]
    return doc


def test_forest_implication_on_random_graphs():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n, edges, roots = _random_graph(rng)
        inst = load_instance(_doc_from(n, edges, roots))
        closed = frozenset(k + 1 for k in range(len(edges)) if rng.random() < 0.6)
        res = is_radial_forest(inst, Topology(closed))
        chosen = [edges[k - 1] for k in sorted(closed)]
        assert res.ok == radial_by_dfs(n, chosen, roots)
        cyc = "cycle" in res.conditions
        count_ok = len(chosen) == n - len(roots)
        covered = "unsupplied" not in res.conditions
        if not cyc and count_ok and covered:
            assert "shared-tree" not in res.conditions
            assert res.ok


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_enumeration_self_consistent(seed):
    rng = np.random.default_rng(seed)
    n, edges, roots = _random_graph(rng)
    inst = load_instance(_doc_from(n, edges, roots))
    topos = enumerate_radial_topologies(inst)
    assert [t.closed_lines for t in topos] == _brute_force(inst)
    for t in topos:
        assert is_radial_forest(inst, t).ok
        assert len(t.closed_lines) == n - len(roots)


class _Sched:
    def __init__(self, closed_by_hour):
        self.hours = len(closed_by_hour)
        self._c = closed_by_hour

    def closed_lines(self, t):
        return self._c[t - 1]


def test_schedule_radiality_names_cycle_hour(fixture_instance):
    good = _closed_all(fixture_instance) - {25}
    hours = [set(good) for _ in range(24)]
    assert assert_schedule_radial(fixture_instance, _Sched(hours)).ok
    hours[4] = set(good) | {33}
    rep = assert_schedule_radial(fixture_instance, _Sched(hours))
    assert list(rep.failures()) == [5]
    assert "cycle" in rep.failures()[5]
    one = load_instance(one_bus_doc())
    assert assert_schedule_radial(one, _Sched([set()] * 24)).ok


@pytest.mark.parametrize("hour", [1, 12, 21, 23])
def test_dispatch_signature_classes_share_costs(fixture_instance, hour):
    from evdnr.ev import load_profile
    from evdnr.network import apply_ev_demand
    from importlib import resources

    prof = load_profile(resources.files("evdnr.data").joinpath("ev_profile_100.csv"))
    inst = apply_ev_demand(fixture_instance, prof, 1.0)
    lo, hi = injection_ranges(inst, hour, ders=False)
    groups = {}
    for topo in enumerate_radial_topologies(inst):
        groups.setdefault(dispatch_signature(inst, topo.closed_lines, lo, hi), []).append(topo.closed_lines)
    assert len(groups) < 76
    for members in groups.values():
        costs = set()
        for closed in members:
            res = _tree_dispatch(inst, closed, hour, False)
            costs.add(None if res is None else round(res[0], 7))
        assert len(costs) == 1
