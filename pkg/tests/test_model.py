from collections import Counter

import numpy as np
import pytest

from evdnr.milp import SolverConfig, Status, parse_var_name, var_name
from evdnr.model import ModelError, build_model, line_big_m
from evdnr.network import CaseConfig, load_instance
from evdnr.simplex import solve_lp

from test_network import one_bus_doc

ALL = [CaseConfig(r, d) for r in (False, True) for d in (False, True)]


def kinds(problem):
    return Counter(v.kind for v in problem.variables)


def test_sdntr_der_dimensions(fixture_instance):
    p = build_model(fixture_instance, CaseConfig(True, True))
    n_sw = len(fixture_instance.switchable_lines)
    assert n_sw == 10
    # 24 x switchable lines + 24 x 4 BESS x 2 mode binaries
    assert p.n_binary == 24 * n_sw + 24 * 4 * 2 == 432
    k = kinds(p)
    assert k["angle"] == 33 * 24 and k["flow"] == 37 * 24
    assert k["switch"] == 240 and k["chg_on"] == k["dchg_on"] == 96


def test_sdn_has_no_binaries(fixture_instance):
    p = build_model(fixture_instance, CaseConfig())
    assert p.n_binary == 0
    assert set(kinds(p)) == {"angle", "flow", "sub"}


def test_relaxed_storage_binaries(fixture_instance):
    p = build_model(fixture_instance, CaseConfig(False, True), SolverConfig(bess_binaries="relaxed"))
    assert p.n_binary == 0 and kinds(p)["chg_on"] == 96


def test_one_bus_model_forces_import():
    inst = load_instance(one_bus_doc())
    p = build_model(inst, CaseConfig())
    assert set(kinds(p)) == {"sub"}
    sol = solve_lp(p)
    assert sol.status == Status.OPTIMAL
    np.testing.assert_allclose(sol.x, 1.0)
    assert sol.objective == pytest.approx(24 * 50.0)


@pytest.mark.parametrize("case", ALL, ids=lambda c: c.label)
def test_structure_invariants(fixture_instance, case):
    p = build_model(fixture_instance, case)
    for v in p.variables:
        assert v.lower <= v.upper
        if v.binary:
            assert (v.lower, v.upper) == (0.0, 1.0)
    n = len(p.variables)
    for c in p.constraints:
        assert all(0 <= j < n for j, _ in c.coeffs)
        assert any(val != 0 for _, val in c.coeffs)
    assert {p.variables[j].kind for j, _ in p.objective} <= {"sub", "gen"}
    tags = Counter(c.tag.split("[")[0] for c in p.constraints)
    assert tags["balance"] == 33 * 24
    if case.reconfiguration_enabled:
        assert tags["radial_count"] == 24
        assert tags["switch_dc_upper"] == tags["switch_dc_lower"] == 240


def test_big_m_is_sound(fixture_instance):
    # with J = 0 the angle term must be free to reach any value the angle bounds allow
    theta = fixture_instance.angle_bound
    for ln in fixture_instance.lines:
        if ln.switchable:
            M = line_big_m(fixture_instance, ln, SolverConfig())
            assert M >= ln.rating + 2 * theta / ln.reactance_x
    assert line_big_m(fixture_instance, fixture_instance.line(1), SolverConfig(big_m=1e4)) == 1e4


def test_non_radial_base_rejected(fixture_instance):
    from dataclasses import replace

    lines = tuple(replace(ln, normally_closed=True) for ln in fixture_instance.lines)
    with pytest.raises(ModelError, match="not radial"):
        build_model(replace(fixture_instance, lines=lines), CaseConfig())


def test_var_names_round_trip():
    for kind, idx in [("flow", (3, 24)), ("sub", (1, 1)), ("chg_on", (4, 7))]:
        assert parse_var_name(var_name(kind, idx)) == (kind, idx)


def test_lp_relaxation_of_sdn_equals_mip(fixture_instance):
    # no binaries: the LP is the model
    p = build_model(fixture_instance.truncated(6), CaseConfig())
    assert solve_lp(p).objective == pytest.approx(369.67965, rel=1e-9)
