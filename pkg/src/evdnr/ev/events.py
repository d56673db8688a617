"""Charging-event extraction and power-class labelling."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import kernels
from .corpus import SAMPLE_MINUTES, SAMPLES_PER_DAY, MeterSeries

DEFAULT_POWER_THRESHOLD_KW = 3.0
DEFAULT_MIN_DURATION_MIN = 30.0


@dataclass(frozen=True)
class ChargingEvent:
    start: float  # minutes after midnight
    duration: float  # minutes
    energy: float  # kWh
    mean_power: float  # kW
    meter_id: str = ""
    day: int = 0

    def __post_init__(self):
        if abs(self.energy - self.mean_power * self.duration / 60.0) > 1e-9 * max(1.0, abs(self.energy)):
            raise ValueError("energy must equal mean power x duration")


@dataclass(frozen=True)
class ProfileClass:
    """Charger class; the band is the half-open interval ``(lower, upper]`` in kW."""

    label: str
    lower: float
    upper: float
    initial_soc: tuple = (0.2, 0.6)  # carried as metadata only

    def contains(self, power: float) -> bool:
        return self.lower < power <= self.upper


DEFAULT_CLASSES = (
    ProfileClass("low", 0.0, 3.7, (0.3, 0.7)),
    ProfileClass("normal", 3.7, 11.0, (0.2, 0.6)),
    ProfileClass("high", 11.0, math.inf, (0.1, 0.5)),
)


def check_classes(classes) -> None:
    """Raise unless the bands tile (0, inf) without gaps or overlaps."""
    bands = sorted((c.lower, c.upper) for c in classes)
    if not bands or bands[0][0] != 0.0 or bands[-1][1] != math.inf:
        raise ValueError("class bands must start at 0 and end at infinity")
    for (_, hi), (lo, _) in zip(bands, bands[1:]):
        if hi != lo:
            raise ValueError("class bands must be contiguous")


def classify_event(event, classes=DEFAULT_CLASSES) -> ProfileClass:
    power = event.mean_power if isinstance(event, ChargingEvent) else float(event)
    for c in classes:
        if c.contains(power):
            return c
    raise ValueError(f"no class band contains {power} kW")


def baseline_level(samples: np.ndarray, threshold: float) -> float:
    """Median of the sub-threshold samples (0 when there are none)."""
    below = samples[samples < threshold]
    return float(np.median(below)) if below.size else 0.0


def extract_events(series: MeterSeries, power_threshold: float = DEFAULT_POWER_THRESHOLD_KW,
                   min_duration: float = DEFAULT_MIN_DURATION_MIN, *, subtract_baseline: bool = False) -> list:
    """Maximal runs of samples at or above ``power_threshold`` lasting ``min_duration``.

    Energy integrates the run at 15-minute resolution.  With
    ``subtract_baseline`` the household's typical non-charging draw (the
    median of sub-threshold samples) is removed from the run first.
    """
    if power_threshold <= 0 or min_duration <= 0:
        raise ValueError("thresholds must be positive")
    x = np.asarray(series.samples, dtype=float)
    starts, ends = kernels.find_runs(x, float(power_threshold))
    base = baseline_level(x, power_threshold) if subtract_baseline else 0.0
    hours = SAMPLE_MINUTES / 60.0
    out = []
    for s, e in zip(starts, ends):
        duration = float((e - s) * SAMPLE_MINUTES)
        if duration < min_duration:
            continue
        energy = float(np.sum(x[s:e] - base) * hours)
        out.append(ChargingEvent(
            start=float((s % SAMPLES_PER_DAY) * SAMPLE_MINUTES),
            duration=duration,
            energy=energy,
            mean_power=energy / (duration / 60.0),
            meter_id=series.meter_id,
            day=int(s // SAMPLES_PER_DAY),
        ))
    return out


def extract_corpus(series_list, power_threshold: float = DEFAULT_POWER_THRESHOLD_KW,
                   min_duration: float = DEFAULT_MIN_DURATION_MIN, *, subtract_baseline: bool = True) -> list:
    events = []
    for s in series_list:
        events.extend(extract_events(s, power_threshold, min_duration, subtract_baseline=subtract_baseline))
    return events
