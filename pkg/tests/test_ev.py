import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evdnr.ev import (DEFAULT_CLASSES, ChargingEvent, ClassModels, CorpusSpec, EvFleetSpec, MeterSeries,
                      build_demand_profile, classify_event, default_config, extract_events, fit_kde,
                      generate_synthetic_corpus, read_profile_csv, run_pipeline, sample_kde,
                      silverman_bandwidth, simulate_fleet)
from evdnr.ev.events import extract_corpus
from evdnr.ev.kde import BANDWIDTH_FLOOR, POSITIVE, WRAP
from evdnr.ev.pipeline import PipelineConfig


def _series(values, days=1):
    x = np.zeros(96 * days)
    x[: len(values)] = values
    return MeterSeries("M1", "2021-01-01", x)


def test_two_hour_flat_event():
    s = _series(np.r_[np.zeros(40), np.full(8, 7.0)])
    (ev,) = extract_events(s, 3.0, 30.0)
    assert (ev.start, ev.duration) == (600.0, 120.0)
    assert ev.energy == pytest.approx(14.0, abs=1e-12)
    assert ev.mean_power == pytest.approx(7.0)


def test_short_spike_is_ignored():
    assert extract_events(_series(np.r_[np.zeros(10), 7.0]), 3.0, 30.0) == []


def test_event_invariant():
    with pytest.raises(ValueError):
        ChargingEvent(0.0, 60.0, 5.0, 7.0)


@pytest.mark.parametrize("power, label", [(2.0, "low"), (3.7, "low"), (7.0, "normal"), (11.0, "normal"),
                                          (19.0, "high")])
def test_default_classes(power, label):
    assert classify_event(power, DEFAULT_CLASSES).label == label


def test_zero_event_corpus():
    corpus = generate_synthetic_corpus(CorpusSpec(n_meters=3, n_days=20, event_probability=0.0), 1)
    assert all(s.samples.max() < 3.0 for s in corpus.series)
    assert extract_corpus(corpus.series) == []


def test_corpus_is_deterministic():
    spec = CorpusSpec(n_meters=4, n_days=30)
    a, b = generate_synthetic_corpus(spec, 9), generate_synthetic_corpus(spec, 9)
    assert a.to_bytes() == b.to_bytes()
    assert a.to_bytes() != generate_synthetic_corpus(spec, 10).to_bytes()


def test_long_corpus_energy_matches_declared_mean():
    corpus = generate_synthetic_corpus(CorpusSpec(n_meters=4, n_days=1000), 3)
    truth = corpus.ground_truth()
    assert truth["injected_events"] > 2000
    assert truth["injected_mean_energy_kwh"] == pytest.approx(truth["declared_mean_energy_kwh"], rel=0.03)


def test_extraction_recall():
    spec = CorpusSpec(n_meters=8, n_days=120)
    corpus = generate_synthetic_corpus(spec, 5)
    found = {(e.meter_id, e.day * 1440 + e.start) for e in extract_corpus(corpus.series)}
    hits = total = 0
    for meter, (start, dur, _, power) in corpus.injected.items():
        for s, d, p in zip(start, dur, power):
            if p < 3.0 or d < 45:  # a run must cover two whole samples above threshold
                continue
            total += 1
            # the run starts at the first sample the session fully or mostly covers
            slot = s // 15
            hits += any((meter, float(k * 15)) in found for k in (slot, slot + 1))
    assert total > 500
    assert hits / total >= 0.99


def test_silverman_matches_hand_computation():
    x = np.random.default_rng(0).standard_normal(1000)
    sd = np.sqrt(np.sum((x - x.mean()) ** 2) / 999)
    s = np.sort(x)
    q = lambda p: s[int(np.floor(p * 999))] + (p * 999 % 1) * (s[int(np.floor(p * 999)) + 1] - s[int(np.floor(p * 999))])  # noqa: E731
    iqr = q(0.75) - q(0.25)
    assert silverman_bandwidth(x) == pytest.approx(0.9 * min(sd, iqr / 1.34) * 1000 ** -0.2, abs=1e-12)


def test_constant_samples_use_floor():
    m = fit_kde([5.0] * 50)
    assert m.bandwidth == BANDWIDTH_FLOOR
    draws = sample_kde(m, 10_000, 1)
    assert abs(draws.mean() - 5.0) <= 3 * BANDWIDTH_FLOOR / 100


def test_kde_resampling_preserves_mean():
    x = np.random.default_rng(4).lognormal(2.5, 0.4, 500)
    draws = sample_kde(fit_kde(x), 100_000, 8)
    assert draws.mean() == pytest.approx(x.mean(), rel=0.01)


def test_kde_needs_two_samples():
    with pytest.raises(ValueError):
        fit_kde([1.0])
    assert sample_kde(fit_kde([1.0, 2.0]), 0, 1).size == 0


def test_supports():
    rng = np.random.default_rng(2)
    dur = fit_kde(rng.uniform(1, 30, 100), support=POSITIVE, upper=1440.0)
    assert sample_kde(dur, 20_000, 3).min() > 0
    starts = np.r_[rng.normal(1260, 60, 700), rng.uniform(0, 1080, 300)] % 1440
    model = fit_kde(starts, support=WRAP, upper=1440.0)
    draws = sample_kde(model, 10_000, 5)
    assert draws.min() >= 0 and draws.max() < 1440
    assert np.mean(draws >= 1080) >= 0.6


def _degenerate_models(start=1200.0, duration=120.0, energy=14.0):
    def k(v):
        return fit_kde([v, v])

    return {"normal": ClassModels("normal", k(start), k(duration), k(energy))}


def test_zero_probability_gives_no_events():
    fleet = simulate_fleet(EvFleetSpec((("normal", 50),), p_daily=0.0, days=10), _degenerate_models(), 1)
    assert fleet.energy.size == 0
    prof = build_demand_profile(fleet, {5: 1.0})
    assert prof.daily_energy_mwh == 0.0


def test_single_deterministic_session_bucketing():
    fleet = simulate_fleet(EvFleetSpec((("normal", 1),), p_daily=1.0, days=1), _degenerate_models(), 1)
    assert fleet.start.tolist() == [1200] and fleet.duration.tolist() == [120]
    # the floor bandwidth leaves at most a few 1e-3 kWh of kernel noise on the energy
    assert fleet.power[0] == pytest.approx(7.0, abs=2e-3)
    prof = build_demand_profile(fleet, {24: 1.0})
    expect = np.zeros(24)
    expect[[20, 21]] = fleet.power[0] / 1000.0
    np.testing.assert_allclose(prof.demand[0], expect, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(prof.demand[0], np.where(expect > 0, 0.007, 0.0), atol=2e-6)
    assert prof.bus_ids == (24,)


def test_weights_must_sum_to_one():
    fleet = simulate_fleet(EvFleetSpec((("normal", 1),), days=1), _degenerate_models(), 1)
    with pytest.raises(ValueError):
        build_demand_profile(fleet, {1: 0.5, 2: 0.4})
    with pytest.raises(ValueError):
        build_demand_profile(fleet, {})


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.1, 1.0))
def test_energy_is_conserved(seed, p):
    rng = np.random.default_rng(seed)
    models = {"normal": ClassModels("normal", fit_kde(rng.uniform(0, 1440, 30), support=WRAP, upper=1440.0),
                                    fit_kde(rng.uniform(30, 300, 30), support=POSITIVE, upper=1440.0),
                                    fit_kde(rng.uniform(5, 30, 30), support=POSITIVE))}
    fleet = simulate_fleet(EvFleetSpec((("normal", 20),), p_daily=p, days=30), models, seed)
    prof = build_demand_profile(fleet, {3: 0.25, 9: 0.75})
    assert prof.provenance["profile_energy_kwh"] == pytest.approx(fleet.energy.sum(), rel=1e-9)
    assert prof.provenance["wrapped_kwh"] >= 0
    assert prof.daily_energy_mwh * 1000 * fleet.days == pytest.approx(prof.provenance["profile_energy_kwh"],
                                                                      rel=1e-9)
    assert np.all(prof.demand >= 0)


@pytest.fixture(scope="module")
def pipeline():
    return run_pipeline(default_config(), 2024)


def test_pipeline_fidelity(pipeline):
    st_ = pipeline.stats
    assert st_["recovered_mean_energy_kwh"] == pytest.approx(st_["truth_injected_mean_energy_kwh"], rel=0.05)
    prov = pipeline.profile.provenance
    assert prov["profile_energy_kwh"] == pytest.approx(prov["sampled_energy_kwh"], rel=1e-3)


def test_pipeline_evening_mass(pipeline):
    events = pipeline.events
    starts = np.array([e.start for e in events])
    truth = pipeline.corpus.spec.evening_mass()
    model = fit_kde(starts, support=WRAP, upper=1440.0)
    draws = sample_kde(model, 10_000, 3)
    assert abs(np.mean(draws >= 1080) - truth) <= 0.05


def test_fixture_weights_concentrate_on_24_25(pipeline):
    col = dict(zip(pipeline.profile.bus_ids, pipeline.profile.demand.sum(axis=1)))
    top = sorted(col, key=col.get, reverse=True)[:2]
    assert sorted(top) == [24, 25]


def test_evening_peak(pipeline):
    shape = pipeline.profile.demand.sum(axis=0)
    assert int(np.argmax(shape)) + 1 in range(19, 24)


def test_pipeline_is_deterministic(pipeline):
    again = run_pipeline(default_config(), 2024)
    assert again.profile.to_csv() == pipeline.profile.to_csv()


def test_profile_csv_round_trip(pipeline):
    back = read_profile_csv(pipeline.profile.to_csv())
    assert back.bus_ids == pipeline.profile.bus_ids
    np.testing.assert_array_equal(back.demand, pipeline.profile.demand)
    with pytest.raises(ValueError):
        read_profile_csv("bus,hour,mw\n1,1,0.1\n")
    with pytest.raises(ValueError):
        read_profile_csv("bus_id,hour,demand_mw\n1,25,0.1\n")


def test_packaged_reference_profile_matches_pipeline(pipeline):
    from importlib import resources

    text = resources.files("evdnr.data").joinpath("ev_profile_100.csv").read_text()
    assert text == pipeline.profile.to_csv()


def test_config_round_trip():
    cfg = default_config()
    assert PipelineConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        PipelineConfig.from_dict({"bogus": 1})
