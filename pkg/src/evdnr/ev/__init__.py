"""EV charging demand synthesis."""
from .corpus import CorpusSpec, MeterSeries, SyntheticCorpus, generate_synthetic_corpus
from .events import DEFAULT_CLASSES, ChargingEvent, ProfileClass, classify_event, extract_events
from .fleet import ClassModels, EvFleetSpec, FleetEvents, fit_class_models, simulate_fleet
from .kde import KdeModel, fit_kde, sample_kde, silverman_bandwidth
from .pipeline import PipelineConfig, default_config, run_pipeline
from .profile import EvDemandProfile, build_demand_profile, load_profile, read_profile_csv

__all__ = [
    "CorpusSpec", "MeterSeries", "SyntheticCorpus", "generate_synthetic_corpus",
    "DEFAULT_CLASSES", "ChargingEvent", "ProfileClass", "classify_event", "extract_events",
    "ClassModels", "EvFleetSpec", "FleetEvents", "fit_class_models", "simulate_fleet",
    "KdeModel", "fit_kde", "sample_kde", "silverman_bandwidth",
    "PipelineConfig", "default_config", "run_pipeline",
    "EvDemandProfile", "build_demand_profile", "load_profile", "read_profile_csv",
]
