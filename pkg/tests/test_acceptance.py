"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
The day-long sweep behind criteria 3 to 6 is solved once per module.
"""
import time
from dataclasses import replace
from importlib import resources

import numpy as np
import pytest

from evdnr.ev import EvFleetSpec, default_config, read_profile_csv, run_pipeline
from evdnr.milp import Status
from evdnr.model import build_model
from evdnr.mps import export_mps, read_mps, same_problem
from evdnr.network import CaseConfig, load_fixture
from evdnr.simplex import solve_lp
from evdnr.solve import effective_instance, probe_big_m, solve_by_enumeration, solve_case, verify_schedule

from _oracles import random_bounded_lp, vertex_enumeration
from conftest import make_arrays

PENETRATIONS = (0.0, 0.1, 0.4, 0.7, 1.0)
LABELS = ("sdn", "sdntr", "sdn-der", "sdntr-der")
# (cheaper, dearer) pairs that must hold in every row
ORDERINGS = (("sdntr", "sdn"), ("sdn-der", "sdn"), ("sdntr-der", "sdntr"), ("sdntr-der", "sdn-der"))
LATE_HOURS = range(19, 25)

# feasible results from every acceptance solve, checked by criterion 3
SOLVED = []


@pytest.fixture(scope="module")
def instance():
    return load_fixture()


@pytest.fixture(scope="module")
def reference_profile():
    text = resources.files("evdnr.data").joinpath("ev_profile_100.csv").read_text()
    return read_profile_csv(text)


@pytest.fixture(scope="module")
def sweep(instance, reference_profile):
    out = {}
    for label in LABELS:
        for p in PENETRATIONS:
            res = solve_case(instance, CaseConfig.from_label(label, p), ev_profile=reference_profile)
            out[label, p] = res
            if res.schedule is not None:
                SOLVED.append((instance, reference_profile, res))
    return out


def _rel(a, b):
    return abs(a - b) / max(1.0, abs(b))


def test_criterion_1_lp_oracle(acceptance):
    acceptance(1, "LP oracle")
    rng = np.random.default_rng(20240501)
    problems = [random_bounded_lp(rng) for _ in range(200)]
    refs = [vertex_enumeration(*p)[0] for p in problems]
    t0 = time.perf_counter()
    sols = [solve_lp(make_arrays(*p)) for p in problems]
    elapsed = time.perf_counter() - t0
    worst, mismatched = 0.0, 0
    for ref, sol in zip(refs, sols):
        if ref is None:
            mismatched += sol.status != Status.INFEASIBLE
            continue
        if sol.status != Status.OPTIMAL:
            mismatched += 1
            continue
        worst = max(worst, _rel(sol.objective, ref))
    acceptance(1, "LP oracle", f"200 LPs, max rel err {worst:.2e}, status mismatches {mismatched}, "
                               f"{elapsed:.2f} s")
    assert mismatched == 0
    assert worst <= 1e-8
    assert elapsed < 10.0


def test_criterion_2_milp_oracle(acceptance, instance):
    acceptance(2, "MILP oracle")
    lines = []
    worst_gap, slowest = 0.0, 0.0
    for label in ("sdn", "sdntr"):
        for hours in (6, 12, 24):
            inst = instance.truncated(hours)
            case = CaseConfig.from_label(label)
            t0 = time.perf_counter()
            res = solve_case(inst, case)
            elapsed = time.perf_counter() - t0
            ref = solve_by_enumeration(inst, case)
            assert res.feasible and ref.feasible, (label, hours)
            SOLVED.append((inst, None, res))
            gap = _rel(res.cost, ref.cost)
            worst_gap, slowest = max(worst_gap, gap), max(slowest, elapsed)
            lines.append(f"{label}/{hours}h {gap:.1e} {elapsed:.1f}s")
    acceptance(2, "MILP oracle", f"max rel gap {worst_gap:.2e}, slowest {slowest:.1f} s ({'; '.join(lines)})")
    assert worst_gap <= 1e-6
    assert slowest < 120.0


def test_criterion_3_feasible_runs_verify(acceptance, sweep):
    acceptance(3, "schedule verification")
    failures = []
    for inst, profile, res in SOLVED:
        eff = effective_instance(inst, res.case, profile)
        report = verify_schedule(eff, res.schedule)
        if not report.ok:
            failures.append(f"{res.case.label} p={res.case.penetration}")
    acceptance(3, "schedule verification", f"{len(SOLVED)} feasible runs, {len(failures)} failed {failures}")
    assert SOLVED
    assert not failures


def test_criterion_4_cost_orderings(acceptance, sweep):
    acceptance(4, "cost orderings")
    violations = []
    for p in PENETRATIONS:
        for cheap, dear in ORDERINGS:
            a, b = sweep[cheap, p], sweep[dear, p]
            if b.cost is None:
                continue
            if a.cost is None:
                violations.append(f"p={p}: {cheap} infeasible while {dear} feasible")
            elif a.cost > b.cost * (1 + 1e-6):
                violations.append(f"p={p}: {cheap} {a.cost:.6f} > {dear} {b.cost:.6f}")
    acceptance(4, "cost orderings", f"{len(violations)} violations {violations}")
    assert not violations


def _frontier(sweep, label):
    """Index of the first penetration level at which ``label`` fails."""
    for i, p in enumerate(PENETRATIONS):
        if sweep[label, p].status == "Infeasible":
            return i
    return len(PENETRATIONS)


def test_criterion_5_frontier(acceptance, sweep):
    acceptance(5, "feasibility frontier")
    f = {label: _frontier(sweep, label) for label in LABELS}
    shown = {k: (PENETRATIONS[v] if v < len(PENETRATIONS) else "none") for k, v in f.items()}
    acceptance(5, "feasibility frontier", f"first failing level {shown}")
    assert f["sdn"] < len(PENETRATIONS) and f["sdn-der"] < len(PENETRATIONS)
    assert f["sdntr"] > max(f["sdn"], f["sdn-der"])
    assert f["sdntr-der"] > f["sdntr"]


def test_criterion_6_line1_switching(acceptance, sweep):
    acceptance(6, "line 1 switching")
    label = "sdntr-der"
    feasible = [p for p in PENETRATIONS if sweep[label, p].schedule is not None]
    assert len(feasible) >= 2
    low, high = feasible[0], feasible[-1]
    s_low, s_high = sweep[label, low].schedule, sweep[label, high].schedule
    hours = [t for t in LATE_HOURS if s_low.closed[1][t - 1] < 0.5 and s_high.closed[1][t - 1] >= 0.5]
    fmt = lambda s: "".join(str(int(round(s.closed[1][t - 1]))) for t in LATE_HOURS)  # noqa: E731
    acceptance(6, "line 1 switching", f"{label} hours 19-24 p={low}: {fmt(s_low)}, p={high}: {fmt(s_high)}, "
                                      f"hours {hours}")
    assert hours


def test_criterion_7_ev_statistics(acceptance):
    acceptance(7, "EV statistics")
    fleet = EvFleetSpec(sizes=(("low", 30), ("normal", 60), ("high", 10)), p_daily=0.9, days=100)
    cfg = replace(default_config(), fleet=fleet)
    t0 = time.perf_counter()
    res = run_pipeline(cfg, 7)
    elapsed = time.perf_counter() - t0
    again = run_pipeline(cfg, 7)
    st = res.stats
    frac = st["charging_day_fraction"]
    truth = st["truth_injected_mean_energy_kwh"]
    mean_err = abs(st["recovered_mean_energy_kwh"] - truth) / truth
    prov = res.profile.provenance
    energy_err = abs(prov["profile_energy_kwh"] - prov["sampled_energy_kwh"]) / prov["sampled_energy_kwh"]
    identical = again.profile.to_csv() == res.profile.to_csv()
    acceptance(7, "EV statistics", f"{st['ev_days']} EV-days, fraction {frac:.4f}, mean energy err "
                                   f"{mean_err:.2%}, profile energy err {energy_err:.3%}, "
                                   f"identical rerun {identical}, {elapsed:.2f} s")
    assert st["ev_days"] == 10_000
    assert 0.885 <= frac <= 0.915
    assert mean_err <= 0.05
    assert energy_err <= 1e-3
    assert identical
    assert elapsed < 60.0


def test_criterion_8_big_m_soundness(acceptance, instance):
    acceptance(8, "big-M soundness")
    case = CaseConfig.from_label("sdntr")
    worst = {0: 0.0, 1: 0.0}
    skipped = []
    for line in instance.switchable_lines:
        for value in (0, 1):
            for h in probe_big_m(instance, case, line.id, value):
                if h.feasible:
                    worst[value] = max(worst[value], h.residual)
                else:
                    skipped.append((line.id, value, h.hour))
    acceptance(8, "big-M soundness", f"{len(instance.switchable_lines)} lines x 24 h, max |flow| open "
                                     f"{worst[0]:.1e}, max |flow - dtheta/x| closed {worst[1]:.1e}, "
                                     f"infeasible forced hours {len(skipped)}")
    assert worst[0] <= 1e-6
    assert worst[1] <= 1e-6


def test_criterion_9_mps_round_trip(acceptance, instance, reference_profile):
    acceptance(9, "MPS round trip")
    case = CaseConfig.from_label("sdntr-der", 1.0)
    problem = build_model(effective_instance(instance, case, reference_profile), case)
    text = export_mps(problem)
    back = read_mps(text)
    diffs = same_problem(problem, back)
    rewritten = export_mps(back) == text
    acceptance(9, "MPS round trip", f"{len(problem.variables)} columns, {len(diffs)} differences, "
                                    f"byte-identical re-export {rewritten}")
    assert not diffs
    assert rewritten
