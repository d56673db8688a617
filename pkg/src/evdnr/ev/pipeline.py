"""End-to-end EV scenario pipeline: corpus, events, densities, fleet, nodal profile."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .corpus import CorpusSpec, SyntheticCorpus, generate_synthetic_corpus
from .events import DEFAULT_CLASSES, DEFAULT_MIN_DURATION_MIN, DEFAULT_POWER_THRESHOLD_KW, extract_corpus
from .fleet import EvFleetSpec, FleetEvents, fit_class_models, simulate_fleet
from .kde import POSITIVE, fit_kde, sample_kde
from .profile import EvDemandProfile, build_demand_profile, check_weights

DEFAULT_SEED = 2024


@dataclass(frozen=True)
class PipelineConfig:
    corpus: CorpusSpec = CorpusSpec()
    fleet: EvFleetSpec = EvFleetSpec()
    weights: tuple = ()  # ((bus, weight), ...)
    power_threshold: float = DEFAULT_POWER_THRESHOLD_KW
    min_duration: float = DEFAULT_MIN_DURATION_MIN
    classes: tuple = DEFAULT_CLASSES

    @property
    def weight_map(self) -> dict:
        return {int(b): float(w) for b, w in self.weights}

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        known = {"corpus", "fleet", "weights", "power_threshold", "min_duration"}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown EV spec keys: {sorted(unknown)}")
        weights = tuple(sorted((int(b), float(w)) for b, w in dict(doc.get("weights", {})).items()))
        cfg = cls(
            corpus=CorpusSpec.from_dict(doc.get("corpus", {})),
            fleet=EvFleetSpec.from_dict(doc.get("fleet", {})),
            weights=weights,
            power_threshold=float(doc.get("power_threshold", DEFAULT_POWER_THRESHOLD_KW)),
            min_duration=float(doc.get("min_duration", DEFAULT_MIN_DURATION_MIN)),
        )
        if weights:
            check_weights(cfg.weight_map)
        return cfg

    def to_dict(self) -> dict:
        return {
            "corpus": self.corpus.to_dict(),
            "fleet": self.fleet.to_dict(),
            "weights": {str(b): w for b, w in self.weights},
            "power_threshold": self.power_threshold,
            "min_duration": self.min_duration,
        }


def default_config() -> PipelineConfig:
    text = resources.files("evdnr.data").joinpath("ev_spec.json").read_text()
    return PipelineConfig.from_dict(json.loads(text))


@dataclass
class PipelineResult:
    corpus: SyntheticCorpus
    events: list
    models: dict
    fleet: FleetEvents
    profile: EvDemandProfile
    seed: int
    stats: dict = field(default_factory=dict)


def _seeds(seed: int):
    """Independent child seeds for corpus, fleet and resampling."""
    ss = np.random.SeedSequence(seed)
    return [int(s.generate_state(1)[0]) for s in ss.spawn(3)]


def recovered_mean_energy(events, n: int = 10_000, seed: int = 0) -> float:
    """Mean of ``n`` KDE draws fitted on the extracted session energies."""
    model = fit_kde([e.energy for e in events], "energy_kwh", support=POSITIVE)
    return float(sample_kde(model, n, seed).mean())


def run_pipeline(config: PipelineConfig, seed: int = DEFAULT_SEED, *, fleet_seed=None) -> PipelineResult:
    """Deterministic in ``seed``; ``fleet_seed`` overrides only the fleet draw."""
    s_corpus, s_fleet, s_check = _seeds(seed)
    corpus = generate_synthetic_corpus(config.corpus, s_corpus)
    events = extract_corpus(corpus.series, config.power_threshold, config.min_duration)
    models = fit_class_models(events, config.classes)
    fleet = simulate_fleet(config.fleet, models, s_fleet if fleet_seed is None else fleet_seed)
    profile = build_demand_profile(fleet, config.weight_map)
    truth = corpus.ground_truth()
    stats = {
        "seed": seed,
        "charging_day_fraction": fleet.charging_day_fraction,
        "ev_days": fleet.days * fleet.n_ev,
        "class_event_counts": fleet.class_counts(),
        "extracted_events": len(events),
        "extracted_class_counts": _class_counts(events, config.classes),
        "recovered_mean_energy_kwh": recovered_mean_energy(events, seed=s_check) if len(events) >= 2 else None,
        "hourly_shape_mw": [float(v) for v in profile.demand.sum(axis=0)],
        "bandwidths": {k: {f: getattr(m, f).bandwidth for f in ("start", "duration", "energy")}
                       for k, m in models.items()},
        "thresholds": {"power_kw": config.power_threshold, "min_duration_min": config.min_duration},
        "class_bands_kw": {c.label: [c.lower, c.upper if np.isfinite(c.upper) else None] for c in config.classes},
        **{f"truth_{k}": v for k, v in truth.items()},
    }
    profile.provenance.update({"seed": seed, "config_sha256": config_digest(config)})
    return PipelineResult(corpus, events, models, fleet, profile, seed, stats)


def _class_counts(events, classes):
    from .events import classify_event

    out = {c.label: 0 for c in classes}
    for e in events:
        out[classify_event(e, classes).label] += 1
    return out


def config_digest(config: PipelineConfig) -> str:
    return hashlib.sha256(json.dumps(config.to_dict(), sort_keys=True).encode()).hexdigest()


def scenario_statistics(result: PipelineResult, config: PipelineConfig, n_scenarios: int,
                        base_seed: int = DEFAULT_SEED):
    """Yield (index, seed, profile, stats) for ``n_scenarios`` seeded fleet simulations.

    The corpus and densities come from ``result``; only the fleet draw varies.
    """
    ss = np.random.SeedSequence([base_seed, 1200])
    for i, child in enumerate(ss.spawn(n_scenarios)):
        s = int(child.generate_state(1)[0])
        fleet = simulate_fleet(config.fleet, result.models, s)
        prof = build_demand_profile(fleet, config.weight_map)
        prof.provenance.update({"scenario": i, "seed": s, "config_sha256": config_digest(config)})
        yield i, s, prof, {"charging_day_fraction": fleet.charging_day_fraction,
                           "class_event_counts": fleet.class_counts(),
                           "daily_energy_mwh": prof.daily_energy_mwh}
