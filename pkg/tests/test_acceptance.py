"""The eight acceptance criteria, one test each.

Every test records a PASS/FAIL line; conftest prints them at the end of the
run.  ``python3 tests/test_acceptance.py`` runs the same checks standalone.
"""

from __future__ import annotations

import random
import time
from collections import Counter

import networkx as nx
import pytest

from generators import random_config, random_model, seeded_mutations
from tmkit import corpus
from tmkit.dsl import parse, serialize
from tmkit.dynamics import check_declared_behavior, derive_precedence
from tmkit.export import from_json, to_json
from tmkit.model import ActionKind, BehaviorEdge
from tmkit.simulate import SimConfig, check_behavioral_consistency, simulate
from tmkit.validate import validate_all

EXPECTED = {"berthing": (21, 35), "cof": (34, 67)}


def corpus_fidelity(name):
    t0 = time.perf_counter()
    m = parse(corpus.model_path(name).read_text(), name)
    report = validate_all(m)
    elapsed = time.perf_counter() - t0
    n_events, n_labels = EXPECTED[name]
    ok = (
        report.ok
        and len(m.events) == n_events
        and sorted(m.annotations) == list(range(1, n_labels + 1))
        and elapsed < 1.0
    )
    detail = f"{len(report.errors)} errors, {len(m.events)} events, {len(m.annotations)} labels, {elapsed:.3f}s"
    return ok, detail


def behavioral_consistency():
    parts = []
    ok = True
    for name in corpus.NAMES:
        m = corpus.load(name)
        g = nx.DiGraph()
        g.add_nodes_from(e.id for e in m.events)
        g.add_edges_from((b.source, b.target) for b in m.behavior)
        order = sorted(m.events, key=lambda e: e.time.declared_order)
        pos = {e.id: e.time.declared_order for e in m.events}
        is_topo = nx.is_directed_acyclic_graph(g) and all(pos[a] < pos[b] for a, b in g.edges)
        contiguous = [e.time.declared_order for e in order] == list(range(1, len(m.events) + 1))
        unsupported = [v for v in check_declared_behavior(m).violations if v.code == "DECLARED_UNSUPPORTED"]
        ok &= is_topo and contiguous and not unsupported
        parts.append(f"{name}: topo={is_topo} 1..{len(order)}={contiguous} unsupported={len(unsupported)}")
    return ok, "; ".join(parts)


def simulation_replay():
    parts = []
    ok = True
    for name in corpus.NAMES:
        m = corpus.load(name)
        cfg = SimConfig.load(corpus.config_path(name))
        assert cfg.max_ticks <= 10_000
        t0 = time.perf_counter()
        texts = []
        for _ in range(3):
            log = simulate(m, cfg)
            texts.append(log.dumps())
        elapsed = time.perf_counter() - t0
        counts = log.occurrences()
        missing = [e.id for e in m.events if counts.get(e.id, 0) < 1]
        violations = check_behavioral_consistency(log, m).violations
        # the full allowed horizon must also fit in the budget
        t1 = time.perf_counter()
        simulate(m, cfg.with_max_ticks(10_000))
        long_run = time.perf_counter() - t1
        stable = len(set(texts)) == 1
        ok &= not missing and not violations and stable and elapsed < 5.0 and long_run < 5.0
        parts.append(
            f"{name}: missing={len(missing)} order_violations={len(violations)} "
            f"byte_stable={stable} 3 runs {elapsed:.3f}s, 10k-tick run {long_run:.3f}s"
        )
    return ok, "; ".join(parts)


def mutation_sweep(per_category=15):
    parts = []
    ok = True
    for name in corpus.NAMES:
        src = corpus.model_path(name).read_text()
        m = parse(src)
        total = 0
        misses = []
        by_cat = Counter()
        for category, code, text in seeded_mutations(m, src, seed=2024, per_category=per_category):
            total += 1
            by_cat[category] += 1
            report = validate_all(parse(text))
            if code not in {v.code for v in report.errors}:
                misses.append(category)
        ok &= total >= 50 and not misses and len(by_cat) == 4
        parts.append(f"{name}: {total} mutations {dict(by_cat)}, false negatives={len(misses)}")
    return ok, "; ".join(parts)


def round_trip_laws(n=1000):
    rng = random.Random(6)
    failures = 0
    for _ in range(n):
        m = random_model(random.Random(rng.getrandbits(64)))
        if parse(serialize(m)) != m:
            failures += 1
    json_ok = all(from_json(to_json(corpus.load(name))) == corpus.load(name) for name in corpus.NAMES)
    return failures == 0 and json_ok, f"{n} generated models, {failures} text mismatches; corpus JSON identity={json_ok}"


def _conservation(model, cfg, log):
    """Expected counts recomputed from the activation sequence and model alone."""
    cost = {s.id: s.cost_ticks for s in model.stages}
    is_create = {s.id: s.kind is ActionKind.CREATE for s in model.stages}
    pulses = {t.id for t in log.tokens if t.origin == "pulse"}
    copies = departed = births = 0
    for a in log.activations:
        if a.tick + 1 < cfg.max_ticks:
            births += sum(1 for t in model.outgoing_triggers(a.stage) if is_create[t.target])
        if a.token in pulses or a.tick + cost[a.stage] >= cfg.max_ticks:
            continue
        k = len(model.outgoing_flows(a.stage))
        copies += max(k - 1, 0)
        departed += k == 0
    return copies, departed, births


def token_conservation(n=500):
    rng = random.Random(7)
    bad = 0
    total_tokens = 0
    for _ in range(n):
        m = random_model(random.Random(rng.getrandbits(64)))
        assert validate_all(m).ok
        cfg = random_config(rng, m)
        log = simulate(m, cfg)
        things = log.things
        created = len(things)
        departed = sum(1 for t in things if t.state == "departed")
        active = sum(1 for t in things if t.state == "active")
        copies, exp_departed, births = _conservation(m, cfg, log)
        origins = Counter(t.origin for t in things)
        total_tokens += created
        if not (
            created == departed + active
            and created == cfg.emissions() + births + copies
            and origins["copy"] == copies
            and departed == exp_departed
        ):
            bad += 1
    return bad == 0, f"{n} models, {total_tokens} tokens, {bad} imbalanced"


def _brute_precedence(model):
    return {
        BehaviorEdge(a.id, b.id)
        for a in model.events
        for b in model.events
        for arrow in model.arrows
        if a.id != b.id and arrow.source in a.region and arrow.target in b.region
    }


def oracle_equivalence(n=200):
    models = [corpus.load(name) for name in corpus.NAMES]
    rng = random.Random(8)
    models += [random_model(random.Random(rng.getrandbits(64))) for _ in range(n)]
    mismatches = sum(derive_precedence(m) != _brute_precedence(m) for m in models)
    return mismatches == 0, f"2 corpora + {n} generated models, {mismatches} mismatches"


CRITERIA = [
    (1, "corpus fidelity (berthing)", lambda: corpus_fidelity("berthing")),
    (2, "corpus fidelity (COF)", lambda: corpus_fidelity("cof")),
    (3, "behavioral consistency", behavioral_consistency),
    (4, "simulation replay", simulation_replay),
    (5, "mutation sweep", mutation_sweep),
    (6, "round-trip laws", round_trip_laws),
    (7, "token conservation", token_conservation),
    (8, "oracle equivalence", oracle_equivalence),
]


def _line(n, title, ok, detail):
    return f"AC{n} {'PASS' if ok else 'FAIL'}  {title}: {detail}"


@pytest.mark.parametrize("n, title, check", CRITERIA, ids=[f"ac{n}" for n, _, _ in CRITERIA])
def test_acceptance(n, title, check, request):
    ok, detail = check()
    line = _line(n, title, ok, detail)
    request.config.stash.setdefault(ACCEPTANCE_KEY, []).append(line)
    print(line)
    assert ok, line


ACCEPTANCE_KEY = pytest.StashKey[list]()


if __name__ == "__main__":
    for n, title, check in CRITERIA:
        print(_line(n, title, *check()))
