from __future__ import annotations

import json
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from mara.workload import WorkloadConfig, dump_events, generate

EGRESSES = ["E1", "E2", "E3", "E4", "E5"]


def test_default_profile():
    reqs = generate(WorkloadConfig(), EGRESSES)
    assert len(reqs) == 1000
    assert all(r.flows == (32_000, 64_000, 128_000) for r in reqs)
    assert all(r.total_rate == 224_000 for r in reqs)
    assert [r.arrival_time for r in reqs] == sorted(r.arrival_time for r in reqs)
    assert all(0 <= r.arrival_time <= 120 for r in reqs)


def test_same_seed_same_stream():
    assert generate(WorkloadConfig(seed=4), EGRESSES) == generate(WorkloadConfig(seed=4), EGRESSES)
    assert generate(WorkloadConfig(seed=4), EGRESSES) != generate(WorkloadConfig(seed=5), EGRESSES)


def test_lifetimes_stay_in_range_over_ten_seeds():
    lifetimes = [r.lifetime for s in range(10) for r in generate(WorkloadConfig(seed=s), EGRESSES)]
    assert min(lifetimes) >= 20 and max(lifetimes) <= 120


@pytest.mark.parametrize("seed", range(10))
def test_interarrival_times_look_exponential(seed):
    cfg = WorkloadConfig(seed=seed)
    times = [r.arrival_time for r in generate(cfg, EGRESSES)]
    gaps = [b - a for a, b in zip([0.0] + times, times)]
    p = stats.kstest(gaps, "expon", args=(0, 1 / cfg.arrival_rate)).pvalue
    assert p > 0.01


def test_class_mix_follows_weights():
    counts = Counter(r.class_id for s in range(5) for r in generate(WorkloadConfig(seed=s), EGRESSES))
    total = sum(counts.values())
    observed = [counts[c] for c in ("Premium", "Gold", "Silver")]
    expected = [total * w for w in (0.40, 0.35, 0.25)]
    assert stats.chisquare(observed, expected).pvalue > 0.01


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 200), seed=st.integers(0, 2**32), k=st.integers(1, 5))
def test_requests_are_well_formed(n, seed, k):
    egresses = EGRESSES[:k]
    reqs = generate(WorkloadConfig(session_count=n, seed=seed), egresses)
    assert [r.id for r in reqs] == list(range(n))
    for r in reqs:
        assert r.total_rate == sum(r.flows)
        assert 20 <= r.lifetime <= 120
        assert 1 <= len(r.egress_set) <= min(3, k)
        assert len(set(r.egress_set)) == len(r.egress_set)
        assert set(r.egress_set) <= set(egresses)


@pytest.mark.parametrize("changes", [
    {"session_count": 0},
    {"duration": 0},
    {"flows": (0, 10)},
    {"lifetime_range": (30, 20)},
    {"class_weights": {"Premium": 0.5, "Gold": 0.2}},
    {"egress_set_sizes": (0,)},
])
def test_invalid_configs(changes):
    with pytest.raises(ValueError):
        generate(WorkloadConfig(**changes), EGRESSES)


def test_no_egresses():
    with pytest.raises(ValueError):
        generate(WorkloadConfig(), [])


def test_event_dump_replays():
    reqs = generate(WorkloadConfig(session_count=20, seed=1), EGRESSES)
    events = json.loads(dump_events(reqs))
    assert len(events) == 40
    assert [e["time"] for e in events] == sorted(e["time"] for e in events)
    arrivals = {e["session"]["id"]: e for e in events if e["kind"] == "arrival"}
    for e in events:
        if e["kind"] == "teardown":
            a = arrivals[e["session_id"]]["session"]
            assert e["time"] == pytest.approx(a["arrival_time"] + a["lifetime"])


def test_from_dict_round_trip():
    cfg = WorkloadConfig.from_dict({"session_count": 5, "flows": [1, 2], "lifetime_range": [1, 2]})
    assert cfg.flows == (1, 2) and cfg.lifetime_range == (1, 2)
    assert cfg.arrival_rate == pytest.approx(5 / 120)
