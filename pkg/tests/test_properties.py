"""Hypothesis-driven laws over generated models."""

import dataclasses
import random
from collections import Counter

from hypothesis import HealthCheck, given, settings, strategies as st

from generators import random_config, random_model
from reference_sim import reference_run
from tmkit.dsl import parse, serialize
from tmkit.dynamics import check_declared_behavior, derive_precedence, merge_events
from tmkit.export import RenderOptions, from_json, to_dot, to_json
from tmkit.model import BehaviorEdge, boundary_of
from tmkit.simulate import loads_log, replay_window, simulate
from tmkit.validate import validate_all, validate_events
from dot_acceptor import parse_dot

seeds = st.integers(min_value=0, max_value=2**32 - 1)
fast = settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@fast
@given(seeds)
def test_generated_models_are_valid(seed):
    assert validate_all(random_model(random.Random(seed))).ok


@fast
@given(seeds)
def test_serialize_parse_identity(seed):
    m = random_model(random.Random(seed))
    text = serialize(m)
    assert parse(text) == m
    assert serialize(parse(text)) == text


@fast
@given(seeds)
def test_json_identity(seed):
    m = random_model(random.Random(seed))
    assert from_json(to_json(m)) == m


@fast
@given(seeds)
def test_dot_always_accepted(seed):
    m = random_model(random.Random(seed))
    for view in ("static", "dynamic", "behavior"):
        parse_dot(to_dot(m, RenderOptions(view=view)))
    c = parse_dot(to_dot(m))
    assert len(c.nodes) == len(m.stages) + len(m.thimacs)


@fast
@given(seeds)
def test_simulator_matches_reference(seed):
    rng = random.Random(seed)
    m = random_model(rng)
    cfg = random_config(rng, m)
    log = simulate(m, cfg)
    acts, counts = reference_run(m, cfg)
    assert [(a.tick, a.stage, a.token) for a in log.activations] == acts
    origins = Counter(t.origin for t in log.tokens)
    for origin in ("source", "trigger", "copy", "pulse"):
        assert origins[origin] == counts[origin]


@fast
@given(seeds)
def test_log_text_round_trip_and_determinism(seed):
    rng = random.Random(seed)
    m = random_model(rng)
    cfg = random_config(rng, m)
    log = simulate(m, cfg)
    assert loads_log(log.dumps()) == log
    assert simulate(m, cfg).dumps() == log.dumps()


@fast
@given(seeds, st.integers(0, 40), st.integers(0, 40))
def test_replay_window_is_a_filter(seed, a, b):
    rng = random.Random(seed)
    m = random_model(rng)
    log = simulate(m, random_config(rng, m))
    lo, hi = min(a, b), max(a, b)
    w = replay_window(log, lo, hi)
    assert list(w.activations) == [x for x in log.activations if lo <= x.tick <= hi]
    assert replay_window(w, lo, hi) == w


@fast
@given(seeds)
def test_boundary_matches_scan(seed):
    m = random_model(random.Random(seed))
    for t in m.thimacs:
        inside = {s for sub in m.subtree(t.path) for s in sub.stages}
        expected = {f for f in m.flows if (f.source in inside) != (f.target in inside)}
        assert boundary_of(m, t.path) == expected


@fast
@given(seeds)
def test_derived_behavior_is_always_supported(seed):
    m = random_model(random.Random(seed))
    derived = tuple(sorted(derive_precedence(m), key=lambda e: (e.source, e.target)))
    with_derived = dataclasses.replace(m, behavior=derived)
    assert check_declared_behavior(with_derived).violations == ()


@fast
@given(seeds, st.data())
def test_merging_adjacent_events(seed, data):
    m = random_model(random.Random(seed))
    edges = sorted(derive_precedence(m), key=lambda e: (e.source, e.target))
    if not edges:
        return
    e = data.draw(st.sampled_from(edges))
    merged = merge_events(m, {e.source, e.target}, "Merged")
    assert len(merged.events) == len(m.events) - 1
    assert validate_events(merged).violations == ()
    assert all(b.source != b.target for b in merged.behavior)
    assert BehaviorEdge("Merged", "Merged") not in merged.behavior


@fast
@given(seeds)
def test_log_structure(seed):
    rng = random.Random(seed)
    m = random_model(rng)
    cfg = random_config(rng, m)
    log = simulate(m, cfg)
    assert all(a.stage in m.stage_index and 0 <= a.tick < cfg.max_ticks for a in log.activations)
    keys = [(a.tick, a.stage, a.token) for a in log.activations]
    assert keys == sorted(keys)
    seen: dict = {}
    for rec in log.meta_events:
        assert rec.start_tick <= rec.end_tick
        assert rec.occurrence_index == seen.get(rec.event_id, 0) + 1
        seen[rec.event_id] = rec.occurrence_index
        region = set(m.event(rec.event_id).region)
        inside = {a.token for a in log.activations if a.stage in region and rec.start_tick <= a.tick <= rec.end_tick}
        assert set(rec.tokens) <= inside
