"""Feeder data model: instance types, JSON ingestion, validation and EV overlay."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

HOURS = 24


class InstanceParseError(ValueError):
    """The document does not match the instance schema."""

    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field = field_path


class InstanceReferenceError(ValueError):
    """A component refers to a bus (or line) that does not exist."""

    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field = field_path


@dataclass(frozen=True)
class Bus:
    id: int
    name: str
    load_profile: tuple


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: int
    to_bus: int
    reactance_x: float
    rating: float
    switchable: bool = False
    normally_closed: bool = True


@dataclass(frozen=True)
class Substation:
    id: int
    bus: int
    price_profile: tuple
    import_cap: float


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    p_min: float
    p_max: float
    cost_profile: tuple


@dataclass(frozen=True)
class PvUnit:
    id: int
    bus: int
    availability_profile: tuple


@dataclass(frozen=True)
class BessUnit:
    id: int
    bus: int
    e_cap: float
    soc_min: float
    soc_max: float
    t_chg: float
    t_dchg: float
    eta_chg: float
    eta_dchg: float
    e_init: float


@dataclass(frozen=True)
class CaseConfig:
    reconfiguration_enabled: bool = False
    ders_enabled: bool = False
    penetration: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.penetration <= 1.0:
            raise ValueError("penetration must lie in [0, 1]")

    @property
    def label(self) -> str:
        base = "SDNTR" if self.reconfiguration_enabled else "SDN"
        return base + ("-DER" if self.ders_enabled else "")

    @classmethod
    def from_label(cls, label: str, penetration: float = 0.0) -> "CaseConfig":
        key = label.strip().lower()
        if key not in CONFIG_LABELS:
            raise ValueError(f"unknown configuration {label!r}")
        reconf, ders = CONFIG_LABELS[key]
        return cls(reconf, ders, penetration)


CONFIG_LABELS = {
    "sdn": (False, False),
    "sdntr": (True, False),
    "sdn-der": (False, True),
    "sdntr-der": (True, True),
}
ALL_CONFIGS = ("sdn", "sdntr", "sdn-der", "sdntr-der")


@dataclass(frozen=True, eq=True)
class NetworkInstance:
    buses: tuple
    lines: tuple
    substations: tuple
    generators: tuple = ()
    pv_units: tuple = ()
    bess_units: tuple = ()
    hours: int = HOURS
    ev_demand: tuple = ()  # ((bus id, (h values)), ...) for buses with EV load
    name: str = ""
    angle_limit: Optional[float] = None
    designated_line: Optional[int] = None
    ev_allocation: tuple = ()  # ((bus id, weight), ...)
    notes: dict = field(default_factory=dict, compare=False, hash=False)

    # -- lookups -----------------------------------------------------------
    @cached_property
    def bus_ids(self) -> tuple:
        return tuple(b.id for b in self.buses)

    @cached_property
    def bus_index(self) -> dict:
        return {b: i for i, b in enumerate(self.bus_ids)}

    def line(self, line_id: int) -> Line:
        for ln in self.lines:
            if ln.id == line_id:
                return ln
        raise KeyError(line_id)

    @property
    def switchable_lines(self) -> tuple:
        return tuple(ln for ln in self.lines if ln.switchable)

    @property
    def fixed_lines(self) -> tuple:
        return tuple(ln for ln in self.lines if not ln.switchable)

    @property
    def base_closed(self) -> frozenset:
        """Closed lines of the base (non-reconfigured) topology."""
        return frozenset(ln.id for ln in self.lines if not ln.switchable or ln.normally_closed)

    @cached_property
    def load(self) -> np.ndarray:
        """Base load, bus x hour, MW."""
        return np.array([b.load_profile for b in self.buses], dtype=float).reshape(len(self.buses), self.hours)

    @cached_property
    def ev(self) -> np.ndarray:
        """EV demand, bus x hour, MW (zeros when no EV overlay is applied)."""
        out = np.zeros((len(self.buses), self.hours))
        for bus, prof in self.ev_demand:
            out[self.bus_index[bus]] = prof
        return out

    @property
    def total_demand(self) -> np.ndarray:
        return self.load + self.ev

    @property
    def angle_bound(self) -> float:
        """Bound on |angle|; by default large enough never to bind on a radial forest."""
        if self.angle_limit is not None:
            return float(self.angle_limit)
        return float(sum(ln.rating * ln.reactance_x for ln in self.lines)) or 1.0

    def without_ders(self) -> "NetworkInstance":
        return replace(self, generators=(), pv_units=(), bess_units=())

    def truncated(self, hours: int) -> "NetworkInstance":
        """First ``hours`` hours of every profile (desk-scale horizons)."""
        if not 1 <= hours <= self.hours:
            raise ValueError(f"horizon must be in 1..{self.hours}")
        cut = lambda p: tuple(p[:hours])  # noqa: E731
        return replace(
            self,
            hours=hours,
            buses=tuple(replace(b, load_profile=cut(b.load_profile)) for b in self.buses),
            substations=tuple(replace(s, price_profile=cut(s.price_profile)) for s in self.substations),
            generators=tuple(replace(g, cost_profile=cut(g.cost_profile)) for g in self.generators),
            pv_units=tuple(replace(p, availability_profile=cut(p.availability_profile)) for p in self.pv_units),
            ev_demand=tuple((b, cut(p)) for b, p in self.ev_demand),
        )


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

def _schema():
    text = resources.files("evdnr.data").joinpath("instance.schema.json").read_text()
    return json.loads(text)


_SCHEMA = None


def _tuple(p):
    return tuple(float(v) for v in p)


def load_instance(document) -> NetworkInstance:
    """Parse an instance document (JSON text, bytes or an already-decoded dict)."""
    global _SCHEMA
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise InstanceParseError("<document>", f"not valid JSON ({exc})") from exc
    else:
        doc = document
    if _SCHEMA is None:
        _SCHEMA = _schema()
    validator = jsonschema.Draft202012Validator(_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise InstanceParseError(path, err.message)

    buses = tuple(Bus(int(b["id"]), b.get("name", f"bus{b['id']}"), _tuple(b["load_profile"])) for b in doc["buses"])
    lines = tuple(
        Line(int(ln["id"]), int(ln["from_bus"]), int(ln["to_bus"]), float(ln["reactance_x"]),
             float(ln["rating"]), bool(ln.get("switchable", False)), bool(ln.get("normally_closed", True)))
        for ln in doc["lines"])
    subs = tuple(Substation(int(s["id"]), int(s["bus"]), _tuple(s["price_profile"]), float(s["import_cap"]))
                 for s in doc["substations"])
    gens = tuple(Generator(int(g["id"]), int(g["bus"]), float(g["p_min"]), float(g["p_max"]),
                           _tuple(g["cost_profile"])) for g in doc["generators"])
    pvs = tuple(PvUnit(int(p["id"]), int(p["bus"]), _tuple(p["availability_profile"])) for p in doc["pv_units"])
    bess = tuple(BessUnit(int(b["id"]), int(b["bus"]), *(float(b[k]) for k in (
        "e_cap", "soc_min", "soc_max", "t_chg", "t_dchg", "eta_chg", "eta_dchg", "e_init"))) for b in doc["bess_units"])
    ev = tuple(sorted((int(k), _tuple(v)) for k, v in doc.get("ev_demand", {}).items()))
    alloc = tuple(sorted((int(k), float(v)) for k, v in doc.get("ev_allocation", {}).items()))

    known = {b.id for b in buses}
    refs = [(f"lines/{i}/from_bus", ln.from_bus) for i, ln in enumerate(lines)]
    refs += [(f"lines/{i}/to_bus", ln.to_bus) for i, ln in enumerate(lines)]
    for key, items in (("substations", subs), ("generators", gens), ("pv_units", pvs), ("bess_units", bess)):
        refs += [(f"{key}/{i}/bus", it.bus) for i, it in enumerate(items)]
    refs += [(f"ev_demand/{b}", b) for b, _ in ev]
    refs += [(f"ev_allocation/{b}", b) for b, _ in alloc]
    for path, bus in refs:
        if bus not in known:
            raise InstanceReferenceError(path, f"bus {bus} does not exist")
    designated = doc.get("designated_line")
    if designated is not None and designated not in {ln.id for ln in lines}:
        raise InstanceReferenceError("designated_line", f"line {designated} does not exist")

    return NetworkInstance(
        buses=buses, lines=lines, substations=subs, generators=gens, pv_units=pvs, bess_units=bess,
        hours=HOURS, ev_demand=ev, name=doc.get("name", ""), angle_limit=doc.get("angle_limit"),
        designated_line=designated, ev_allocation=alloc, notes=doc.get("notes", {}),
    )


def read_instance(path) -> NetworkInstance:
    return load_instance(Path(path).read_text())


def dump_instance(inst: NetworkInstance) -> str:
    """Emit ``inst`` as an instance document; ``load_instance`` reads it back unchanged."""
    doc = {"name": inst.name}
    if inst.notes:
        doc["notes"] = inst.notes
    if inst.angle_limit is not None:
        doc["angle_limit"] = inst.angle_limit
    if inst.designated_line is not None:
        doc["designated_line"] = inst.designated_line
    if inst.ev_allocation:
        doc["ev_allocation"] = {str(b): w for b, w in inst.ev_allocation}
    if inst.ev_demand:
        doc["ev_demand"] = {str(b): list(p) for b, p in inst.ev_demand}
    doc["buses"] = [{"id": b.id, "name": b.name, "load_profile": list(b.load_profile)} for b in inst.buses]
    doc["lines"] = [{"id": ln.id, "from_bus": ln.from_bus, "to_bus": ln.to_bus, "reactance_x": ln.reactance_x,
                     "rating": ln.rating, "switchable": ln.switchable, "normally_closed": ln.normally_closed}
                    for ln in inst.lines]
    doc["substations"] = [{"id": s.id, "bus": s.bus, "price_profile": list(s.price_profile),
                           "import_cap": s.import_cap} for s in inst.substations]
    doc["generators"] = [{"id": g.id, "bus": g.bus, "p_min": g.p_min, "p_max": g.p_max,
                          "cost_profile": list(g.cost_profile)} for g in inst.generators]
    doc["pv_units"] = [{"id": p.id, "bus": p.bus, "availability_profile": list(p.availability_profile)}
                       for p in inst.pv_units]
    doc["bess_units"] = [{"id": b.id, "bus": b.bus, "e_cap": b.e_cap, "soc_min": b.soc_min, "soc_max": b.soc_max,
                          "t_chg": b.t_chg, "t_dchg": b.t_dchg, "eta_chg": b.eta_chg, "eta_dchg": b.eta_dchg,
                          "e_init": b.e_init} for b in inst.bess_units]
    return json.dumps(doc, indent=1)


def fixture_path() -> Path:
    return Path(str(resources.files("evdnr.data").joinpath("ieee33_modified.json")))


def load_fixture() -> NetworkInstance:
    """The bundled modified IEEE 33-bus case."""
    return read_instance(fixture_path())


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    code: str
    subject: str
    message: str

    def __str__(self):
        return f"[{self.code}] {self.subject}: {self.message}"


@dataclass
class ValidationReport:
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "instance valid"
        return "\n".join(str(v) for v in self.violations)


def _profile_issues(name, prof, hours, nonneg=True):
    out = []
    if len(prof) != hours:
        out.append(Violation("profile-length", name, f"{len(prof)} entries, expected {hours}"))
    if nonneg and any(v < 0 for v in prof):
        out.append(Violation("negative-value", name, "profile has negative entries"))
    if any(not np.isfinite(v) for v in prof):
        out.append(Violation("non-finite", name, "profile has non-finite entries"))
    return out


def validate_instance(inst: NetworkInstance) -> ValidationReport:
    """Every violated invariant of ``inst``; an empty report means valid."""
    v = []
    T = inst.hours
    known = set()
    for b in inst.buses:
        if b.id in known:
            v.append(Violation("duplicate-id", f"bus {b.id}", "bus id repeated"))
        known.add(b.id)
        v += _profile_issues(f"bus {b.id} load_profile", b.load_profile, T)

    def ref(subject, bus):
        if bus not in known:
            v.append(Violation("dangling-reference", subject, f"bus {bus} does not exist"))

    seen = set()
    for ln in inst.lines:
        s = f"line {ln.id}"
        if ln.id in seen:
            v.append(Violation("duplicate-id", s, "line id repeated"))
        seen.add(ln.id)
        ref(s, ln.from_bus)
        ref(s, ln.to_bus)
        if ln.from_bus == ln.to_bus:
            v.append(Violation("self-loop", s, "from_bus equals to_bus"))
        if not ln.reactance_x > 0:
            v.append(Violation("reactance", s, "reactance_x must be > 0"))
        if not ln.rating > 0:
            v.append(Violation("rating", s, "rating must be > 0"))
    if not inst.substations:
        v.append(Violation("no-substation", "instance", "at least one substation is required"))
    for sub in inst.substations:
        s = f"substation {sub.id}"
        ref(s, sub.bus)
        v += _profile_issues(f"{s} price_profile", sub.price_profile, T)
        if not sub.import_cap > 0:
            v.append(Violation("import-cap", s, "import_cap must be > 0"))
    for g in inst.generators:
        s = f"generator {g.id}"
        ref(s, g.bus)
        v += _profile_issues(f"{s} cost_profile", g.cost_profile, T, nonneg=False)
        if not 0 <= g.p_min <= g.p_max:
            v.append(Violation("generator-limits", s, "need 0 <= p_min <= p_max"))
    for p in inst.pv_units:
        s = f"pv {p.id}"
        ref(s, p.bus)
        v += _profile_issues(f"{s} availability_profile", p.availability_profile, T)
    for b in inst.bess_units:
        s = f"bess {b.id}"
        ref(s, b.bus)
        if not b.e_cap > 0:
            v.append(Violation("bess-capacity", s, "e_cap must be > 0"))
        if not 0 <= b.soc_min < b.soc_max <= 1:
            v.append(Violation("bess-soc", s, "need 0 <= soc_min < soc_max <= 1"))
        if not b.soc_min * b.e_cap - 1e-12 <= b.e_init <= b.soc_max * b.e_cap + 1e-12:
            v.append(Violation("bess-initial-energy", s,
                               f"e_init {b.e_init} outside [{b.soc_min * b.e_cap}, {b.soc_max * b.e_cap}]"))
        if not (b.t_chg >= 1 and b.t_dchg >= 1):
            v.append(Violation("bess-duration", s, "t_chg and t_dchg must be >= 1 h"))
        if not (0 < b.eta_chg <= 1 and 0 < b.eta_dchg <= 1):
            v.append(Violation("bess-efficiency", s, "efficiencies must lie in (0, 1]"))
    for bus, prof in inst.ev_demand:
        ref(f"ev_demand {bus}", bus)
        v += _profile_issues(f"ev_demand bus {bus}", prof, T)
    if inst.ev_allocation:
        for bus, w in inst.ev_allocation:
            ref(f"ev_allocation {bus}", bus)
    if inst.designated_line is not None and inst.designated_line not in seen:
        v.append(Violation("dangling-reference", "designated_line", f"line {inst.designated_line} does not exist"))

    # connectivity over all lines
    if inst.buses:
        import networkx as nx

        g = nx.Graph()
        g.add_nodes_from(known)
        g.add_edges_from((ln.from_bus, ln.to_bus) for ln in inst.lines
                         if ln.from_bus in known and ln.to_bus in known)
        comps = list(nx.connected_components(g))
        if len(comps) > 1:
            main = max(comps, key=len)
            stranded = sorted(set().union(*(c for c in comps if c is not main)))
            v.append(Violation("disconnected", "network", f"buses {stranded} are not connected to the rest"))
    return ValidationReport(v)


# ---------------------------------------------------------------------------
# EV overlay
# ---------------------------------------------------------------------------

def apply_ev_demand(inst: NetworkInstance, profile, penetration: float) -> NetworkInstance:
    """Overlay ``penetration`` x the 100% EV profile as extra nodal load.

    ``profile`` needs ``bus_ids`` and a ``demand`` array (bus x >= hours, MW).
    Base loads are untouched; buses absent from the profile get no EV load.
    """
    if not 0.0 <= penetration <= 1.0:
        raise ValueError("penetration must lie in [0, 1]")
    known = set(inst.bus_ids)
    unknown = [b for b in profile.bus_ids if b not in known]
    if unknown:
        raise InstanceReferenceError("ev_profile", f"buses {unknown} are not in the instance")
    demand = np.asarray(profile.demand, dtype=float)
    if demand.shape[1] < inst.hours:
        raise ValueError(f"EV profile has {demand.shape[1]} hours, instance needs {inst.hours}")
    rows = []
    for bus, row in zip(profile.bus_ids, demand):
        scaled = penetration * row[: inst.hours]
        if np.any(scaled != 0.0):
            rows.append((int(bus), tuple(float(x) for x in scaled)))
    return replace(inst, ev_demand=tuple(sorted(rows)))
