"""Seeded random generators for valid models, schedules and mutations."""

from __future__ import annotations

import random
from collections import deque

from tmkit.model import (
    ActionKind,
    BehaviorDecl,
    Direction,
    EventDecl,
    FlowDecl,
    Model,
    StageDecl,
    ThimacDecl,
    TriggerDecl,
    build_model,
    stage_path,
)
from tmkit.simulate import SimConfig, Source
from tmkit.validate import INTRA_ADJACENCY

C, P, R, RCV = ActionKind.CREATE, ActionKind.PROCESS, ActionKind.RELEASE, ActionKind.RECEIVE
IN = (ActionKind.TRANSFER, Direction.IN)
OUT = (ActionKind.TRANSFER, Direction.OUT)
N = Direction.NONE

# legal intra-thimac chains
CHAINS = (
    [(C, N), (R, N), OUT],
    [IN, (RCV, N), (R, N), OUT],
    [IN, (RCV, N), (P, N), (R, N), OUT],
    [(C, N), (P, N), (R, N), OUT],
    [IN, (RCV, N)],
    [IN, (RCV, N), (P, N)],
    [(C, N)],
    [(C, N), (P, N)],
)

_DISPLAY = ("Port", "Head Office", "Tank #2", 'say "hi"', "Lager Ö", "a\\b", "x")
_TEXT = ("", "moves", "goes on", "tab\tin", "line\nbreak", "ünï", 'q"uote')


def random_model(rng: random.Random, *, max_thimacs: int = 6, name: str = "G") -> Model:
    """A model that passes every validator without errors.

    Cross-thimac flows and triggers only point from lower to higher thimac
    index, so simulation always runs dry.
    """
    decls: list = []
    paths: list[str] = []
    for i in range(rng.randint(1, max_thimacs)):
        parent = rng.choice(paths) if paths and rng.random() < 0.4 else None
        path = f"T{i}" if parent is None else f"{parent}.T{i}"
        display = rng.choice(_DISPLAY) if rng.random() < 0.3 else None
        decls.append(ThimacDecl(path, display))
        paths.append(path)

    labels = iter(rng.sample(range(1, 400), 300))
    chain_of: dict[str, list[str]] = {}
    flows: list[FlowDecl] = []
    for path in paths:
        chain = rng.choice(CHAINS)
        sids = []
        for kind, direction in chain:
            ann = next(labels) if rng.random() < 0.3 else None
            decls.append(StageDecl(path, kind, direction, rng.randint(1, 3), ann))
            sids.append(stage_path(path, kind, direction))
        chain_of[path] = sids
        for a, b in zip(sids, sids[1:]):
            flows.append(FlowDecl(a, b, None, next(labels) if rng.random() < 0.2 else None))

    outs = [(i, stage_path(p, *OUT)) for i, p in enumerate(paths) if stage_path(p, *OUT) in chain_of[p]]
    ins = [(i, stage_path(p, *IN)) for i, p in enumerate(paths) if stage_path(p, *IN) in chain_of[p]]
    for i, out in outs:
        later = [s for j, s in ins if j > i]
        for target in rng.sample(later, min(len(later), rng.choice((0, 1, 1, 2)))):
            label = rng.choice(_TEXT) if rng.random() < 0.2 else None
            flows.append(FlowDecl(out, target, label, next(labels) if rng.random() < 0.3 else None))

    all_stages = [s for p in paths for s in chain_of[p]]
    index = {s: i for i, p in enumerate(paths) for s in chain_of[p]}
    creates = [s for s in all_stages if s.endswith(".create")]
    flow_pairs = {(f.source, f.target) for f in flows}
    triggers: list[TriggerDecl] = []
    for _ in range(rng.randint(0, 3)):
        src = rng.choice(all_stages)
        later = [s for s in creates if index[s] > index[src] and (src, s) not in flow_pairs]
        if later:
            dst = rng.choice(later)
            if all((t.source, t.target) != (src, dst) for t in triggers):
                triggers.append(TriggerDecl(src, dst, None, next(labels) if rng.random() < 0.3 else None))
    decls += flows + triggers

    adj: dict[str, set[str]] = {s: set() for s in all_stages}
    for a in flows + triggers:
        adj[a.source].add(a.target)
        adj[a.target].add(a.source)
    n_events = rng.randint(0, 5)
    orders = rng.sample(range(1, 50), n_events) if rng.random() < 0.3 else [None] * n_events
    for k in range(n_events):
        region = _connected_region(rng, adj, rng.choice(all_stages), rng.randint(1, 5))
        hint = rng.randint(1, 9) if rng.random() < 0.3 else None
        decls.append(EventDecl(f"E{k + 1}", rng.choice(_TEXT), tuple(region), orders[k], hint))
    seen = set()
    for _ in range(rng.randint(0, 2 * n_events)):
        i, j = sorted(rng.sample(range(1, n_events + 1), 2)) if n_events > 1 else (0, 0)
        if i and (i, j) not in seen:
            seen.add((i, j))
            decls.append(BehaviorDecl(f"E{i}", f"E{j}"))
    return build_model(decls, name)


def _connected_region(rng, adj, start, size) -> list[str]:
    region, queue = [start], deque([start])
    while queue and len(region) < size:
        cur = queue.popleft()
        nbrs = sorted(adj[cur] - set(region))
        rng.shuffle(nbrs)
        for n in nbrs[: rng.randint(1, 2)]:
            if len(region) < size:
                region.append(n)
                queue.append(n)
    return region


def random_config(rng: random.Random, model: Model, max_ticks: int = 40) -> SimConfig:
    creates = [s.id for s in model.stages if s.kind is ActionKind.CREATE]
    sources = []
    for stage in rng.sample(creates, rng.randint(0, len(creates))):
        ticks = sorted(set(rng.randrange(max_ticks) for _ in range(rng.randint(0, 4))))
        sources.append(Source(stage, tuple(ticks)))
    return SimConfig(max_ticks, tuple(sources), rng.randrange(1000))


# --------------------------------------------------------------------------
# Single-edit mutations of model source text

CATEGORIES = {
    "adjacency": "INTRA_ADJACENCY",
    "boundary": "BOUNDARY_RULE",
    "dangling": "REGION_MEMBER",
    "selfloop": "BEHAVIOR_CYCLE",
}


def _insert(source: str, line: str) -> str:
    head, _, tail = source.rstrip().rpartition("}")
    return f"{head}  {line}\n}}{tail}\n"


def mutation_candidates(model: Model) -> dict[str, list[tuple[str, str]]]:
    """Every single-line edit per category, as (description, inserted line)."""
    flows = {(f.source, f.target) for f in model.flows}
    out: dict[str, list[tuple[str, str]]] = {k: [] for k in CATEGORIES}
    for t in model.thimacs:
        for a in t.stages:
            for b in t.stages:
                sa, sb = model.stage(a), model.stage(b)
                if a != b and (a, b) not in flows and (sb.kind, sb.direction) not in INTRA_ADJACENCY[(sa.kind, sa.direction)]:
                    out["adjacency"].append((f"{a}->{b}", f"flow {a} -> {b}"))
    stages = list(model.stages)
    for sa in stages:
        for sb in stages:
            if sa.owner == sb.owner or (sa.id, sb.id) in flows:
                continue
            if (sa.kind, sa.direction) == OUT and (sb.kind, sb.direction) == IN:
                continue
            out["boundary"].append((f"{sa.id}->{sb.id}", f"flow {sa.id} -> {sb.id}"))
    for e in model.events:
        out["dangling"].append((e.id, e.id))
        out["selfloop"].append((e.id, f"behavior {e.id} -> {e.id}"))
    return out


def apply_mutation(source: str, category: str, payload: str, nonce: int = 0) -> str:
    if category == "dangling":
        # add a member naming a thimac that does not exist
        marker = f"event {payload} "
        start = source.index(marker)
        bracket = source.index("region [", start) + len("region [")
        ghost = f"Ghost{nonce}.process"
        return source[:bracket] + ghost + ", " + source[bracket:]
    return _insert(source, payload)


def seeded_mutations(model: Model, source: str, seed: int, per_category: int):
    """Yield (category, expected code, mutated text) sampled without replacement."""
    rng = random.Random(seed)
    cands = mutation_candidates(model)
    for category, code in CATEGORIES.items():
        pool = cands[category]
        for n, (_, payload) in enumerate(rng.sample(pool, min(per_category, len(pool)))):
            yield category, code, apply_mutation(source, category, payload, n)
