"""Command-line front end: ``evdnr validate|solve|sweep|evgen``.

Exit codes
----------
0  success (valid instance, Feasible solve, finished sweep or evgen)
1  invalid instance, bad reference or malformed spec
2  missing or unreadable input file
3  solve finished with status Infeasible
4  solver limit hit; the payload carries the incumbent and the bound gap
5  internal solver failure
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
from pathlib import Path

from . import __version__
from .ev.pipeline import DEFAULT_SEED, PipelineConfig, config_digest, default_config, run_pipeline, \
    scenario_statistics
from .ev.profile import load_profile
from .milp import SolverConfig
from .model import build_model
from .mps import export_mps
from .network import ALL_CONFIGS, CaseConfig, InstanceParseError, InstanceReferenceError, apply_ev_demand, \
    fixture_path, read_instance, validate_instance
from .solve import CaseResult, SolverFailure, solve_by_enumeration, solve_case

log = logging.getLogger("evdnr")

EXIT_OK, EXIT_INVALID, EXIT_MISSING, EXIT_INFEASIBLE, EXIT_LIMIT, EXIT_FAILURE = 0, 1, 2, 3, 4, 5
STATUS_EXIT = {"Feasible": EXIT_OK, "Infeasible": EXIT_INFEASIBLE, "Limit": EXIT_LIMIT}
DEFAULT_PENETRATIONS = (0.0, 0.1, 0.4, 0.7, 1.0)
ORDER_TOL = 1e-6


class _InputMissing(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _dump(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _penetration(text: str) -> float:
    p = float(text)
    if not 0.0 <= p <= 1.0:
        raise argparse.ArgumentTypeError("penetration must lie in [0, 1]")
    return p


def _penetration_list(text: str) -> tuple:
    vals = tuple(_penetration(v) for v in text.split(",") if v.strip())
    if not vals:
        raise argparse.ArgumentTypeError("penetration list is empty")
    return vals


def _load_instance(path):
    path = Path(path) if path else fixture_path()
    if not path.is_file():
        raise _InputMissing(f"instance file not found: {path}")
    return read_instance(path)


def _reference_profile(args):
    """The 100% EV profile: from ``--ev-profile`` or regenerated from ``--seed``."""
    if args.ev_profile:
        path = Path(args.ev_profile)
        if not path.is_file():
            raise _InputMissing(f"EV profile not found: {path}")
        return load_profile(path)
    return run_pipeline(default_config(), args.seed).profile


def _solver_config(args) -> SolverConfig:
    limits = {k: getattr(args, k) for k in ("time_limit", "node_limit") if getattr(args, k) is not None}
    return SolverConfig(bess_binaries=args.bess_binaries, **limits)


def _prepare(inst, case, profile, hours):
    eff = apply_ev_demand(inst, profile, case.penetration) if profile is not None else inst
    return eff.truncated(hours) if hours else eff


def _run_case(eff, case, cfg, solver) -> CaseResult:
    if solver == "enum":
        return solve_by_enumeration(eff, case, cfg)
    return solve_case(eff, case, cfg)


def _result_doc(result: CaseResult, manifest: dict) -> dict:
    doc = result.to_json()
    doc["manifest"] = manifest
    if result.status == "Limit":
        gap = None
        if result.cost is not None and result.bound is not None and math.isfinite(result.bound):
            gap = (result.cost - result.bound) / max(1.0, abs(result.cost))
        doc["limit"] = {"incumbent_usd": result.cost, "bound_usd": result.bound, "relative_gap": gap}
    return doc


def _manifest(args, label, p) -> dict:
    return {"instance": str(args.instance or fixture_path().name), "config": CaseConfig.from_label(label).label,
            "penetration": p,
            "ev_profile": args.ev_profile, "seed": args.seed, "hours": args.hours,
            "bess_binaries": args.bess_binaries, "solver": args.solver, "time_limit": args.time_limit,
            "node_limit": args.node_limit, "version": __version__}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_validate(args) -> int:
    path = Path(args.instance) if args.instance else fixture_path()
    if not path.is_file():
        print(f"error: file not found: {path}", file=sys.stderr)
        return EXIT_MISSING
    try:
        inst = read_instance(path)
    except (InstanceParseError, InstanceReferenceError) as exc:
        print(f"invalid: {exc}")
        return EXIT_INVALID
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        return EXIT_MISSING
    report = validate_instance(inst)
    print(report)
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_solve(args) -> int:
    inst = _load_instance(args.instance)
    case = CaseConfig.from_label(args.config, args.penetration)
    profile = _reference_profile(args) if (args.ev_profile or args.penetration > 0) else None
    eff = _prepare(inst, case, profile, args.hours)
    cfg = _solver_config(args)
    if args.export_mps:
        _write_atomic(Path(args.export_mps), export_mps(build_model(eff, case, cfg)))
    result = _run_case(eff, case, cfg, args.solver)
    doc = _result_doc(result, _manifest(args, case.label, case.penetration))
    text = _dump(doc)
    if args.out:
        _write_atomic(Path(args.out), text)
        cost = "-" if result.cost is None else f"{result.cost:.6f}"
        print(f"{case.label} p={case.penetration:g}: {result.status} cost={cost}")
    else:
        sys.stdout.write(text)
    return STATUS_EXIT[result.status]


def ordering_violations(costs: dict, penetrations) -> list:
    """Cost-ordering breaches among the feasible cells of one sweep.

    ``costs`` maps (label, p) to a cost or None.
    """
    out = []
    rel = lambda a, b: a > b + ORDER_TOL * max(1.0, abs(b))  # noqa: E731
    for p in penetrations:
        c = {lab: costs.get((lab, p)) for lab in ALL_CONFIGS}
        pairs = [("sdntr", "sdn"), ("sdn-der", "sdn")] + [("sdntr-der", o) for o in ALL_CONFIGS if o != "sdntr-der"]
        for lo, hi in pairs:
            if c[lo] is not None and c[hi] is not None and rel(c[lo], c[hi]):
                out.append({"penetration": p, "expected": f"{lo} <= {hi}", "costs": [c[lo], c[hi]]})
    return out


def frontier(statuses: dict, penetrations) -> dict:
    """First penetration (in list order) at which each configuration has no schedule."""
    out = {}
    for lab in ALL_CONFIGS:
        first = None
        for p in penetrations:
            if statuses.get((lab, p)) not in ("Feasible", "Limit"):
                first = p
                break
        out[lab] = first
    return out


def cmd_sweep(args) -> int:
    inst = _load_instance(args.instance)
    profile = _reference_profile(args)
    cfg = _solver_config(args)
    out = Path(args.out or "sweep_out")
    levels = args.penetrations
    cells, costs, statuses, timing = {}, {}, {}, {}
    for lab in ALL_CONFIGS:
        for p in levels:
            case = CaseConfig.from_label(lab, p)
            t0 = time.perf_counter()
            try:
                res = _run_case(_prepare(inst, case, profile, args.hours), case, cfg, args.solver)
                doc = _result_doc(res, _manifest(args, lab, p))
                status, cost = res.status, res.cost
            except (SolverFailure, ValueError) as exc:
                log.error("cell %s p=%g failed: %s", lab, p, exc)
                doc = {"status": "Error", "error": str(exc), "manifest": _manifest(args, lab, p)}
                status, cost = "Error", None
            timing[f"{lab}@{p:g}"] = round((time.perf_counter() - t0) * 1e3, 1)
            doc.get("stats", {}).pop("wall_ms", None)  # keep cell files reproducible
            _write_atomic(out / "cells" / f"{lab}_p{p:g}.json", _dump(doc))
            cells[(lab, p)] = doc
            statuses[(lab, p)] = status
            costs[(lab, p)] = cost if status == "Feasible" else None
            log.info("%s p=%g: %s %s", lab, p, status, cost)

    matrix = io.StringIO()
    w = csv.writer(matrix, lineterminator="\n")
    w.writerow(["penetration", *ALL_CONFIGS])
    for p in levels:
        row = [f"{p:g}"]
        for lab in ALL_CONFIGS:
            st, c = statuses[(lab, p)], cells[(lab, p)].get("cost_usd")
            row.append(f"{c:.6f}" if st == "Feasible" else (f"limit:{c:.6f}" if st == "Limit" and c is not None
                                                            else st.lower()))
        w.writerow(row)
    _write_atomic(out / "sweep_matrix.csv", matrix.getvalue())

    plot = io.StringIO()
    w = csv.writer(plot, lineterminator="\n")
    w.writerow(["config", "penetration", "cost_usd", "status"])
    for lab in ALL_CONFIGS:
        for p in levels:
            c = costs[(lab, p)]
            w.writerow([lab, f"{p:g}", "" if c is None else f"{c:.6f}", statuses[(lab, p)]])
    _write_atomic(out / "sweep_plot.csv", plot.getvalue())

    # designated-line switching table under the full configuration
    line = inst.designated_line
    switching = {}
    if line is not None:
        tab = io.StringIO()
        w = csv.writer(tab, lineterminator="\n")
        hours = args.hours or inst.hours
        w.writerow(["penetration", *[f"h{t}" for t in range(1, hours + 1)]])
        for p in levels:
            sched = cells[("sdntr-der", p)].get("schedule")
            states = sched["line_closed"].get(str(line)) if sched else None
            switching[f"{p:g}"] = states
            w.writerow([f"{p:g}", *(states if states is not None else ["infeasible"] * hours)])
        _write_atomic(out / f"switching_line{line}.csv", tab.getvalue())

    violations = ordering_violations(costs, levels)
    report = {
        "penetrations": list(levels),
        "configs": list(ALL_CONFIGS),
        "cells": {f"{lab}@{p:g}": {"status": statuses[(lab, p)], "cost_usd": cells[(lab, p)].get("cost_usd")}
                  for lab in ALL_CONFIGS for p in levels},
        "first_infeasible": frontier(statuses, levels),
        "designated_line": line,
        "designated_line_closed": switching,
        "ordering_violations": len(violations),
        "seed": args.seed,
        "ev_profile_sha256": hashlib.sha256(profile.to_csv().encode()).hexdigest(),
        "version": __version__,
    }
    _write_atomic(out / "sweep_report.json", _dump(report))
    _write_atomic(out / "sweep_timing.json", _dump(timing))
    err = out / "ordering_errors.json"
    if violations:
        _write_atomic(err, _dump(violations))
        log.error("%d cost-ordering violation(s); see %s", len(violations), err)
    elif err.exists():
        err.unlink()
    print(matrix.getvalue(), end="")
    return EXIT_OK


def _ev_config(args) -> PipelineConfig:
    if not args.spec:
        return default_config()
    path = Path(args.spec)
    if not path.is_file():
        raise _InputMissing(f"EV spec not found: {path}")
    return PipelineConfig.from_dict(json.loads(path.read_text()))


def cmd_evgen(args) -> int:
    try:
        config = _ev_config(args)
    except (ValueError, KeyError, TypeError) as exc:
        print(f"invalid EV spec: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out = Path(args.out or "evgen_out")
    result = run_pipeline(config, args.seed)
    _write_atomic(out / "ev_profile.csv", result.profile.to_csv())
    provenance = {**result.profile.provenance, "spec": config.to_dict(), "version": __version__,
                  "bandwidths": result.stats["bandwidths"], "thresholds": result.stats["thresholds"],
                  "class_bands_kw": result.stats["class_bands_kw"]}
    _write_atomic(out / "ev_provenance.json", _dump(provenance))
    _write_atomic(out / "ev_stats.json", _dump(result.stats))
    if args.scenarios:
        fractions = []
        digest = config_digest(config)
        for i, s, prof, st in scenario_statistics(result, config, args.scenarios, args.seed):
            doc = {"provenance": {**prof.provenance, "base_seed": args.seed, "config_sha256": digest},
                   "stats": st, "profile_csv": prof.to_csv()}
            _write_atomic(out / "scenarios" / f"scenario_{i:04d}.json", _dump(doc))
            fractions.append(st["charging_day_fraction"])
        summary = {"n_scenarios": len(fractions), "base_seed": args.seed,
                   "charging_day_fraction_mean": sum(fractions) / len(fractions),
                   "charging_day_fraction_min": min(fractions), "charging_day_fraction_max": max(fractions)}
        _write_atomic(out / "scenario_summary.json", _dump(summary))
    print(f"charging-day fraction {result.stats['charging_day_fraction']:.5f}; "
          f"daily EV energy {result.profile.daily_energy_mwh:.4f} MWh; written to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--instance", metavar="PATH", help="instance JSON (default: bundled 33-bus fixture)")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed for every random draw")
    common.add_argument("--out", metavar="PATH", help="output file (solve) or directory (sweep, evgen)")
    common.add_argument("-v", "--verbose", action="store_true")

    run = argparse.ArgumentParser(add_help=False)
    run.add_argument("--ev-profile", metavar="PATH", help="100%% EV profile CSV (bus_id,hour,demand_mw)")
    run.add_argument("--hours", type=int, metavar="INT", help="truncate the horizon to the first INT hours")
    run.add_argument("--bess-binaries", choices=("exact", "relaxed"), default="exact")
    run.add_argument("--solver", choices=("bnb", "enum"), default="bnb")
    run.add_argument("--time-limit", type=float, metavar="SEC", help="branch-and-bound wall-clock limit per case")
    run.add_argument("--node-limit", type=int, metavar="INT", help="branch-and-bound node limit per case")

    ap = argparse.ArgumentParser(prog="evdnr", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="check an instance file")

    sp = sub.add_parser("solve", parents=[common, run], help="solve one configuration")
    sp.add_argument("--config", choices=ALL_CONFIGS, required=True)
    sp.add_argument("--penetration", type=_penetration, default=0.0, metavar="FLOAT")
    sp.add_argument("--export-mps", metavar="PATH", help="also write the model in MPS format")

    sw = sub.add_parser("sweep", parents=[common, run], help="all configurations over penetration levels")
    sw.add_argument("--penetrations", type=_penetration_list, default=DEFAULT_PENETRATIONS, metavar="LIST",
                    help="comma-separated levels (default 0,0.1,0.4,0.7,1)")

    ev = sub.add_parser("evgen", parents=[common], help="generate the EV demand profile")
    ev.add_argument("--spec", metavar="PATH", help="EV pipeline spec JSON (default: bundled)")
    ev.add_argument("--scenarios", type=int, default=0, metavar="N",
                    help="also write N seeded fleet scenarios (statistics mode)")
    return ap


COMMANDS = {"validate": cmd_validate, "solve": cmd_solve, "sweep": cmd_sweep, "evgen": cmd_evgen}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "hours", None) is not None and args.hours < 1:
        print("error: --hours must be positive", file=sys.stderr)
        return EXIT_INVALID
    try:
        return COMMANDS[args.command](args)
    except _InputMissing as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (InstanceParseError, InstanceReferenceError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
