"""Synthetic smart-meter corpus with known EV charging sessions.

Each meter is a household with one EV of a fixed power class.  The base load
stays well below the extraction threshold, so every injected session that is
long enough is recoverable.  The generating parameters are kept next to the
samples as ground truth.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import kernels

SAMPLES_PER_DAY = 96
SAMPLE_MINUTES = 15


@dataclass(frozen=True)
class CorpusSpec:
    """Parametric generator for the meter corpus.

    Start times follow a wrapped Gaussian mixture (minutes after midnight),
    session energy is log-normal (kWh), charger power is uniform inside the
    band of the meter's class.
    """

    n_meters: int = 24
    n_days: int = 365
    start_date: str = "2021-01-01"
    event_probability: float = 0.6
    start_weights: tuple = (0.72, 0.18, 0.10)
    start_means: tuple = (1230.0, 750.0, 60.0)
    start_sds: tuple = (70.0, 150.0, 50.0)
    energy_log_mean: float = float(np.log(14.0))
    energy_log_sd: float = 0.35
    class_mix: tuple = (("low", 0.3), ("normal", 0.6), ("high", 0.1))
    class_power_kw: tuple = (("low", 3.3, 3.7), ("normal", 6.6, 7.4), ("high", 17.0, 21.0))
    base_load_kw: tuple = (0.3, 0.9)
    base_noise_kw: float = 0.1

    @property
    def mean_energy(self) -> float:
        """Mean of the declared log-normal session energy, kWh."""
        return float(np.exp(self.energy_log_mean + 0.5 * self.energy_log_sd ** 2))

    def evening_mass(self) -> float:
        """Share of start times falling in 18:00-24:00 under the declared mixture."""
        from scipy.stats import norm

        total = 0.0
        for w, m, s in zip(self.start_weights, self.start_means, self.start_sds):
            # wrapped: sum the mass of the shifted windows
            for shift in (-1440.0, 0.0, 1440.0):
                total += w * (norm.cdf(1440 + shift, m, s) - norm.cdf(1080 + shift, m, s))
        return float(total)

    @classmethod
    def from_dict(cls, doc: dict) -> "CorpusSpec":
        doc = dict(doc)
        for key in ("start_weights", "start_means", "start_sds", "base_load_kw"):
            if key in doc:
                doc[key] = tuple(doc[key])
        if "class_mix" in doc:
            doc["class_mix"] = tuple((k, float(v)) for k, v in dict(doc["class_mix"]).items())
        if "class_power_kw" in doc:
            doc["class_power_kw"] = tuple((k, float(a), float(b)) for k, (a, b) in dict(doc["class_power_kw"]).items())
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown corpus spec keys: {sorted(unknown)}")
        spec = cls(**doc)
        spec.check()
        return spec

    def to_dict(self) -> dict:
        d = asdict(self)
        d["class_mix"] = dict(self.class_mix)
        d["class_power_kw"] = {k: [a, b] for k, a, b in self.class_power_kw}
        return d

    def check(self):
        if self.n_meters < 0 or self.n_days < 0:
            raise ValueError("meter and day counts must be non-negative")
        if not 0.0 <= self.event_probability <= 1.0:
            raise ValueError("event_probability must lie in [0, 1]")
        if not (len(self.start_weights) == len(self.start_means) == len(self.start_sds)):
            raise ValueError("start mixture arrays differ in length")
        if abs(sum(self.start_weights) - 1.0) > 1e-9:
            raise ValueError("start mixture weights must sum to 1")
        labels = {k for k, _ in self.class_mix}
        if labels - {k for k, _, _ in self.class_power_kw}:
            raise ValueError("every class in class_mix needs a power band")


@dataclass
class MeterSeries:
    meter_id: str
    start_date: str
    samples: np.ndarray  # kW, 15-minute means
    ev_class: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.size % SAMPLES_PER_DAY:
            raise ValueError("sample count must cover whole days")
        if np.any(self.samples < 0):
            raise ValueError("meter samples must be non-negative")

    @property
    def n_days(self) -> int:
        return self.samples.size // SAMPLES_PER_DAY


@dataclass
class SyntheticCorpus:
    series: list
    spec: CorpusSpec
    seed: int
    injected: dict = field(default_factory=dict)  # meter id -> (start_min, duration_min, energy_kwh, power_kw)

    def ground_truth(self) -> dict:
        energies = np.concatenate([v[2] for v in self.injected.values()]) if self.injected else np.zeros(0)
        return {
            "declared_mean_energy_kwh": self.spec.mean_energy,
            "declared_evening_mass": self.spec.evening_mass(),
            "injected_events": int(energies.size),
            "injected_mean_energy_kwh": float(energies.mean()) if energies.size else 0.0,
        }

    def to_bytes(self) -> bytes:
        """Canonical serialisation, used for determinism checks and caching."""
        parts = [json.dumps({"spec": self.spec.to_dict(), "seed": self.seed}, sort_keys=True).encode()]
        for s in self.series:
            parts.append(s.meter_id.encode())
            parts.append(s.samples.tobytes())
        return b"\n".join(parts)


def _sample_starts(rng, spec: CorpusSpec, n):
    comp = rng.choice(len(spec.start_weights), size=n, p=np.asarray(spec.start_weights))
    mu = np.asarray(spec.start_means)[comp]
    sd = np.asarray(spec.start_sds)[comp]
    return np.mod(rng.normal(mu, sd), 1440.0)


def generate_synthetic_corpus(spec: CorpusSpec, seed: int) -> SyntheticCorpus:
    """Deterministic corpus for ``seed``; overlapping sessions are dropped, not merged."""
    spec.check()
    rng = np.random.default_rng(seed)
    labels = [k for k, _ in spec.class_mix]
    probs = np.array([p for _, p in spec.class_mix], dtype=float)
    probs = probs / probs.sum()
    bands = {k: (a, b) for k, a, b in spec.class_power_kw}
    n_min = spec.n_days * 1440
    out, injected = [], {}
    for m in range(spec.n_meters):
        meter_id = f"M{m + 1:03d}"
        cls = labels[rng.choice(len(labels), p=probs)]
        base = rng.uniform(*spec.base_load_kw)
        samples = np.clip(base + spec.base_noise_kw * rng.standard_normal(spec.n_days * SAMPLES_PER_DAY), 0.0, None)
        has = rng.random(spec.n_days) < spec.event_probability
        days = np.flatnonzero(has)
        n = days.size
        start = np.floor(days * 1440.0 + _sample_starts(rng, spec, n)).astype(np.int64)
        energy = np.exp(rng.normal(spec.energy_log_mean, spec.energy_log_sd, n))
        lo, hi = bands[cls]
        power = rng.uniform(lo, hi, n)
        duration = np.maximum(np.rint(energy / power * 60.0), 1).astype(np.int64)
        # drop sessions that run into the previous one or past the corpus end
        keep = np.ones(n, dtype=bool)
        last_end = -1
        for i in range(n):
            if start[i] <= last_end or start[i] + duration[i] > n_min:
                keep[i] = False
            else:
                last_end = start[i] + duration[i]
        start, duration, power = start[keep], duration[keep], power[keep]
        energy = power * duration / 60.0  # exact energy after minute rounding
        minute = kernels.minute_power(n_min, start, duration, power)
        samples = samples + minute.reshape(-1, SAMPLE_MINUTES).mean(axis=1)
        out.append(MeterSeries(meter_id, spec.start_date, samples, cls))
        injected[meter_id] = (start, duration, energy, power)
    return SyntheticCorpus(out, spec, seed, injected)
