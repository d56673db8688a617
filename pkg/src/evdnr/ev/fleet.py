"""Monte-Carlo fleet simulation from per-class KDE models."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kde import POSITIVE, WRAP, KdeModel, fit_kde, sample_kde

MAX_DURATION_MIN = 1440.0


@dataclass(frozen=True)
class EvFleetSpec:
    sizes: tuple = (("low", 300), ("normal", 600), ("high", 100))
    p_daily: float = 0.9
    days: int = 365
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_daily <= 1.0:
            raise ValueError("p_daily must lie in [0, 1]")
        if any(n < 0 for _, n in self.sizes):
            raise ValueError("fleet sizes must be non-negative")
        if self.days < 0:
            raise ValueError("days must be non-negative")

    @property
    def n_ev(self) -> int:
        return int(sum(n for _, n in self.sizes))

    @classmethod
    def from_dict(cls, doc: dict) -> "EvFleetSpec":
        doc = dict(doc)
        if "sizes" in doc:
            doc["sizes"] = tuple((k, int(v)) for k, v in dict(doc["sizes"]).items())
        return cls(**doc)

    def to_dict(self) -> dict:
        return {"sizes": dict(self.sizes), "p_daily": self.p_daily, "days": self.days, "seed": self.seed}


@dataclass(frozen=True)
class ClassModels:
    """Start, duration and energy densities of one class, fitted on the same events.

    Draws share the data-point index across the three features, so each
    simulated session perturbs one observed session (product kernel).
    """

    label: str
    start: KdeModel
    duration: KdeModel
    energy: KdeModel

    def sample(self, n: int, rng: np.random.Generator):
        idx = rng.integers(0, self.start.samples.size, n) if n else np.zeros(0, dtype=np.int64)
        start = sample_kde(self.start, n, rng, index=idx)
        duration = sample_kde(self.duration, n, rng, index=idx)
        energy = sample_kde(self.energy, n, rng, index=idx)
        return start, duration, energy


def fit_class_models(events, classes) -> dict:
    """One :class:`ClassModels` per class with at least two extracted events."""
    from .events import classify_event

    groups = {c.label: [] for c in classes}
    for e in events:
        groups[classify_event(e, classes).label].append(e)
    out = {}
    for label, evs in groups.items():
        if len(evs) < 2:
            continue
        out[label] = ClassModels(
            label,
            fit_kde([e.start for e in evs], "start_min", support=WRAP, upper=1440.0),
            fit_kde([e.duration for e in evs], "duration_min", support=POSITIVE, upper=MAX_DURATION_MIN),
            fit_kde([e.energy for e in evs], "energy_kwh", support=POSITIVE),
        )
    return out


@dataclass
class FleetEvents:
    """Sampled sessions of one fleet simulation; times are absolute minutes."""

    days: int
    n_ev: int
    ev: np.ndarray
    day: np.ndarray
    start: np.ndarray
    duration: np.ndarray
    energy: np.ndarray
    power: np.ndarray
    label: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def charging_day_fraction(self) -> float:
        total = self.days * self.n_ev
        return float(self.ev.size / total) if total else 0.0

    def class_counts(self) -> dict:
        labels, counts = np.unique(self.label, return_counts=True)
        return {str(k): int(v) for k, v in zip(labels, counts)}


def simulate_fleet(fleet: EvFleetSpec, models: dict, seed=None) -> FleetEvents:
    """Bernoulli(p_daily) per EV per day; sessions drawn from the EV's class models.

    Start and duration are rounded to whole minutes (duration at least 1),
    and power is energy / duration, so each session's energy is exact.
    """
    seed = fleet.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    ev_ids, days, labels = [], [], []
    starts, durs, energies = [], [], []
    first = 0
    for label, size in fleet.sizes:
        if size == 0:
            continue
        charge = rng.random((size, fleet.days)) < fleet.p_daily
        ev_i, day_i = np.nonzero(charge)
        n = ev_i.size
        if n and label not in models:
            raise ValueError(f"no fitted models for class {label!r}")
        if n:
            s, d, e = models[label].sample(n, rng)
        else:
            s = d = e = np.zeros(0)
        ev_ids.append(ev_i + first)
        days.append(day_i)
        labels.append(np.full(n, label))
        starts.append(s)
        durs.append(d)
        energies.append(e)
        first += size
    cat = lambda parts, dt: np.concatenate(parts).astype(dt) if parts else np.zeros(0, dt)  # noqa: E731
    ev = cat(ev_ids, np.int64)
    day = cat(days, np.int64)
    start_min = np.rint(cat(starts, float)).astype(np.int64) % 1440
    duration = np.maximum(np.rint(cat(durs, float)), 1).astype(np.int64)
    energy = cat(energies, float)
    order = np.lexsort((ev, day))
    ev, day, start_min, duration, energy = ev[order], day[order], start_min[order], duration[order], energy[order]
    label = cat(labels, object)[order] if labels else np.zeros(0, object)
    start = day * 1440 + start_min
    return FleetEvents(fleet.days, fleet.n_ev, ev, day, start, duration, energy,
                       energy / (duration / 60.0), label.astype(str), {"seed": int(seed)})
