"""Hourly nodal EV demand from simulated sessions."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .. import kernels


@dataclass
class EvDemandProfile:
    bus_ids: tuple
    demand: np.ndarray  # bus x hour, MW
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.bus_ids = tuple(int(b) for b in self.bus_ids)
        self.demand = np.asarray(self.demand, dtype=float).reshape(len(self.bus_ids), -1)
        if np.any(self.demand < 0):
            raise ValueError("EV demand must be non-negative")

    @property
    def hours(self) -> int:
        return self.demand.shape[1]

    @property
    def daily_energy_mwh(self) -> float:
        return float(self.demand.sum())

    def at(self, bus: int, hour: int) -> float:
        return float(self.demand[self.bus_ids.index(bus), hour - 1])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bus_id", "hour", "demand_mw"])
        for b, row in zip(self.bus_ids, self.demand):
            for h, v in enumerate(row, start=1):
                w.writerow([b, h, repr(float(v))])
        return buf.getvalue()


def read_profile_csv(text: str, hours: int = 24) -> EvDemandProfile:
    """Parse ``bus_id,hour,demand_mw`` rows; missing (bus, hour) pairs are zero."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["bus_id", "hour", "demand_mw"]:
        raise ValueError("EV profile header must be bus_id,hour,demand_mw")
    rows = {}
    for i, rec in enumerate(reader, start=2):
        try:
            bus, hour, mw = int(rec["bus_id"]), int(rec["hour"]), float(rec["demand_mw"])
        except (TypeError, ValueError) as exc:
            raise ValueError(f"line {i}: {exc}") from None
        if not 1 <= hour <= hours:
            raise ValueError(f"line {i}: hour {hour} outside 1..{hours}")
        if mw < 0:
            raise ValueError(f"line {i}: negative demand")
        rows.setdefault(bus, np.zeros(hours))[hour - 1] = mw
    buses = sorted(rows)
    demand = np.array([rows[b] for b in buses]) if buses else np.zeros((0, hours))
    return EvDemandProfile(tuple(buses), demand)


def load_profile(path) -> EvDemandProfile:
    with open(path, encoding="utf-8") as fh:
        return read_profile_csv(fh.read())


def check_weights(weights: dict) -> None:
    if not weights:
        raise ValueError("allocation weights are empty")
    w = np.array(list(weights.values()), dtype=float)
    if np.any(~np.isfinite(w)) or np.any(w < 0):
        raise ValueError("allocation weights must be finite and non-negative")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"allocation weights sum to {w.sum()}, expected 1")


def hourly_kw(fleet_events, horizon: int = 24):
    """Mean kW per hour of day over the simulated days, plus the wrapped energy (kWh).

    The simulated days are treated as periodic: a session still running at
    the end of the final day continues from the start of the first one, so
    every sampled kWh lands in the profile.
    """
    days = fleet_events.days
    n_min = days * 1440
    if n_min == 0:
        return np.zeros(horizon), 0.0
    start = np.asarray(fleet_events.start, dtype=np.int64)
    duration = np.asarray(fleet_events.duration, dtype=np.int64)
    power = np.asarray(fleet_events.power, dtype=float)
    over = np.minimum(np.maximum(start + duration - n_min, 0), n_min)
    tail = over > 0
    wrapped = float(np.sum(over * power) / 60.0)
    start = np.concatenate([start, np.zeros(int(tail.sum()), np.int64)])
    duration = np.concatenate([duration, over[tail]])
    power = np.concatenate([power, power[tail]])
    minute = kernels.minute_power(n_min, start, duration, power)
    # 15-minute slot energy, summed into the containing hour
    slots = minute.reshape(days, 24 * 4, 15).sum(axis=2) / 60.0
    hourly_kwh = slots.reshape(days, 24, 4).sum(axis=2)
    per_hour = np.clip(hourly_kwh.mean(axis=0), 0.0, None)
    if horizon != 24:
        per_hour = per_hour[:horizon]
    return per_hour, wrapped


def build_demand_profile(fleet_events, weights: dict, horizon: int = 24) -> EvDemandProfile:
    """Average daily hourly demand (MW) split across buses by ``weights``.

    Sessions running past midnight land in the next day; those running past
    the final day wrap to the first, and that energy is reported in the
    provenance.
    """
    check_weights(weights)
    per_hour_kw, wrapped = hourly_kw(fleet_events, horizon)
    buses = sorted(int(b) for b in weights)
    w = np.array([weights[b] if b in weights else weights[str(b)] for b in buses], dtype=float)
    demand = np.outer(w, per_hour_kw) / 1000.0
    sampled = float(fleet_events.energy.sum())
    prov = {
        "days": fleet_events.days,
        "sessions": int(fleet_events.energy.size),
        "sampled_energy_kwh": sampled,
        "profile_energy_kwh": float(per_hour_kw.sum() * fleet_events.days),
        "wrapped_kwh": wrapped,
        "weights": {str(b): float(x) for b, x in zip(buses, w)},
    }
    prov.update(fleet_events.meta)
    return EvDemandProfile(tuple(buses), demand, prov)
