"""Regenerate the bundled 33-bus fixture and the reference EV profile.

Run from the repository root:  python3 tools/build_fixture.py
Every numeric choice below is invented for the fixture; see the ``notes``
block written into the JSON.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from evdnr.ev.pipeline import DEFAULT_SEED, default_config, run_pipeline

DATA = Path(__file__).resolve().parents[1] / "src" / "evdnr" / "data"

# Baran-Wu branch data: (from, to, r ohm, x ohm); lines 33-37 are the tie lines
BRANCHES = [
    (1, 2, 0.0922, 0.0470), (2, 3, 0.4930, 0.2511), (3, 4, 0.3660, 0.1864), (4, 5, 0.3811, 0.1941),
    (5, 6, 0.8190, 0.7070), (6, 7, 0.1872, 0.6188), (7, 8, 0.7114, 0.2351), (8, 9, 1.0300, 0.7400),
    (9, 10, 1.0440, 0.7400), (10, 11, 0.1966, 0.0650), (11, 12, 0.3744, 0.1238), (12, 13, 1.4680, 1.1550),
    (13, 14, 0.5416, 0.7129), (14, 15, 0.5910, 0.5260), (15, 16, 0.7463, 0.5450), (16, 17, 1.2890, 1.7210),
    (17, 18, 0.7320, 0.5740), (2, 19, 0.1640, 0.1565), (19, 20, 1.5042, 1.3554), (20, 21, 0.4095, 0.4784),
    (21, 22, 0.7089, 0.9373), (3, 23, 0.4512, 0.3083), (23, 24, 0.8980, 0.7091), (24, 25, 0.8960, 0.7011),
    (6, 26, 0.2030, 0.1034), (26, 27, 0.2842, 0.1447), (27, 28, 1.0590, 0.9337), (28, 29, 0.8042, 0.7006),
    (29, 30, 0.5075, 0.2585), (30, 31, 0.9744, 0.9630), (31, 32, 0.3105, 0.3619), (32, 33, 0.3410, 0.5302),
    (21, 8, 2.0, 2.0), (9, 15, 2.0, 2.0), (12, 22, 2.0, 2.0), (18, 33, 0.5, 0.5), (25, 29, 0.5, 0.5),
]
TIE_LINES = (33, 34, 35, 36, 37)

# peak active load per bus, kW (bus 1 hosts substation 1 and carries none)
PEAK_KW = {
    1: 0, 2: 100, 3: 90, 4: 120, 5: 60, 6: 60, 7: 200, 8: 200, 9: 60, 10: 60, 11: 45, 12: 60, 13: 60,
    14: 120, 15: 60, 16: 60, 17: 60, 18: 90, 19: 90, 20: 90, 21: 90, 22: 90, 23: 90, 24: 420, 25: 420,
    26: 60, 27: 60, 28: 60, 29: 120, 30: 200, 31: 150, 32: 210, 33: 60,
}

# evening-peaked daily shape (fraction of peak), hours 1..24
LOAD_SHAPE = [0.55, 0.50, 0.47, 0.45, 0.45, 0.48, 0.56, 0.65, 0.70, 0.72, 0.73, 0.74,
              0.73, 0.72, 0.72, 0.75, 0.82, 0.92, 0.98, 1.00, 0.97, 0.88, 0.60, 0.46]

PARAMS = {
    # switchable beyond the ties: line 1 (substation 1 outlet) and four sectionalising lines
    "switchable_extra": (1, 7, 10, 24, 25),
    "normally_open_extra": (25,),
    "rating_default": 4.0,
    "ratings": {22: 1.30, 33: 1.5, 34: 1.5, 35: 1.5, 36: 1.5, 37: 1.5},
    "sub_caps": (3.3, 2.05),
    "price_sub1": [38, 35, 33, 32, 32, 35, 42, 50, 55, 56, 57, 58,
                   57, 56, 56, 58, 66, 78, 84, 86, 84, 78, 95, 95],
    "price_sub2_offset": 0.0,
    "price_sub2_late": 60.0,  # hours 23-24
    "dg": {"buses": (23, 24), "p_max": 0.08, "cost": [70.0] * 24},
    "pv": {"buses": (15, 16, 21, 27), "peak": 0.25},
    "bess": {"e_cap": 1.0, "t": 4, "soc": (0.1, 0.95), "eta": 0.95, "e_init": 0.5},
}


def pv_shape():
    h = np.arange(1, 25) - 0.5
    return np.clip(np.sin(np.pi * (h - 6.0) / 13.0), 0.0, None)


def build(params=PARAMS) -> dict:
    lines = []
    for k, (a, b, _r, x) in enumerate(BRANCHES, start=1):
        sw = k in TIE_LINES or k in params["switchable_extra"]
        closed = k not in TIE_LINES and k not in params["normally_open_extra"]
        entry = {"id": k, "from_bus": a, "to_bus": b, "reactance_x": x,
                 "rating": float(params["ratings"].get(k, params["rating_default"]))}
        if sw:
            entry["switchable"] = True
            entry["normally_closed"] = closed
        lines.append(entry)
    buses = [{"id": n, "name": f"bus {n}",
              "load_profile": [round(PEAK_KW[n] / 1000.0 * s, 6) for s in LOAD_SHAPE]} for n in range(1, 34)]
    p1 = [float(v) for v in params["price_sub1"]]
    p2 = [v + params["price_sub2_offset"] for v in p1[:22]] + [params["price_sub2_late"]] * 2
    subs = [
        {"id": 1, "bus": 1, "price_profile": p1, "import_cap": params["sub_caps"][0]},
        {"id": 2, "bus": 33, "price_profile": p2, "import_cap": params["sub_caps"][1]},
    ]
    dg = params["dg"]
    gens = [{"id": i, "bus": b, "p_min": 0.0, "p_max": dg["p_max"], "cost_profile": list(dg["cost"])}
            for i, b in enumerate(dg["buses"], start=1)]
    shape = pv_shape()
    pv = [{"id": i, "bus": b, "availability_profile": [round(params["pv"]["peak"] * s, 6) for s in shape]}
          for i, b in enumerate(params["pv"]["buses"], start=1)]
    bs = params["bess"]
    bess = [{"id": i, "bus": b, "e_cap": bs["e_cap"], "soc_min": bs["soc"][0], "soc_max": bs["soc"][1],
             "t_chg": bs["t"], "t_dchg": bs["t"], "eta_chg": bs["eta"], "eta_dchg": bs["eta"],
             "e_init": bs["e_init"]} for i, b in enumerate(params["pv"]["buses"], start=1)]
    weights = default_config().weight_map
    return {
        "name": "ieee33-modified",
        "notes": {
            "source": "Topology, reactances and peak loads follow the Baran-Wu 33-bus feeder; "
                      "reactance in ohm is used directly as the flow divisor.",
            "fixture_invented": "Load shape, prices, import caps, ratings, DG/PV/BESS sizes and EV "
                                "allocation weights are invented so that congestion appears as EV load rises.",
            "switchable": "Tie lines 33-37, line 1 (substation 1 outlet) and sectionalising lines "
                          f"{[k for k in params['switchable_extra'] if k != 1]} are switchable; "
                          "line 25 (6-26) is normally open so each substation roots one tree.",
        },
        "designated_line": 1,
        "ev_allocation": {str(b): w for b, w in sorted(weights.items())},
        "buses": buses, "lines": lines, "substations": subs,
        "generators": gens, "pv_units": pv, "bess_units": bess,
    }


def write_all(params=PARAMS):
    doc = build(params)
    (DATA / "ieee33_modified.json").write_text(json.dumps(doc, indent=1) + "\n")
    result = run_pipeline(default_config(), DEFAULT_SEED)
    (DATA / "ev_profile_100.csv").write_text(result.profile.to_csv())


if __name__ == "__main__":
    write_all()
