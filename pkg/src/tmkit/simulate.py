"""Deterministic tick-based token flow over a validated model.

Per tick, in this order:

1. tokens whose stay at a stage has elapsed move along every outgoing flow
   (the first flow keeps the token, each further flow gets a copy); with no
   outgoing flow the token departs;
2. sources emit fresh tokens at their create stages;
3. triggers fired during the previous tick take effect: a trigger into a
   create stage births a token there, any other target is activated by a
   zero-lifetime pulse that carries nothing.

Every arrival is an :class:`Activation`.  Arrivals of a tick are recorded in
(stage id, token id) order, so the log is a pure function of model and
config.  Event occurrences are then read off the activation sequence and
written as meta-event records.
"""

from __future__ import annotations

import hashlib
import json
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Iterable, Optional

from .model import ActionKind, Model, ModelError
from .validate import CODES, ValidationReport, Violation, build_report, validate_all

LOG_FORMAT_VERSION = 1


class SimulationError(ModelError):
    pass


class UnvalidatedModel(SimulationError):
    def __init__(self, report: ValidationReport):
        first = report.errors[0]
        super().__init__(
            f"model has {len(report.errors)} validation error(s); first: {first.code} {first.subject}"
        )
        self.report = report


class ConfigError(SimulationError):
    pass


class MismatchedLog(SimulationError):
    pass


def model_fingerprint(model: Model) -> str:
    from .dsl import serialize

    return hashlib.sha256(serialize(model).encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class Source:
    stage: str
    ticks: tuple[int, ...]


@dataclass(frozen=True)
class SimConfig:
    max_ticks: int = 1000
    sources: tuple[Source, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.max_ticks, int) or self.max_ticks < 0:
            raise ConfigError(f"max_ticks must be a non-negative integer, got {self.max_ticks!r}")
        for src in self.sources:
            for t in src.ticks:
                if not isinstance(t, int) or not 0 <= t < self.max_ticks:
                    raise ConfigError(
                        f"source {src.stage}: tick {t!r} outside [0, {self.max_ticks})"
                    )

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        try:
            sources = tuple(
                Source(s["stage"], tuple(s.get("ticks", (0,)))) for s in data.get("sources", ())
            )
            return cls(int(data.get("max_ticks", 1000)), sources, int(data.get("seed", 0)))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"malformed simulation config: {e}") from None

    @classmethod
    def load(cls, path) -> "SimConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}: {e}") from None

    def to_dict(self) -> dict:
        return {
            "max_ticks": self.max_ticks,
            "seed": self.seed,
            "sources": [{"stage": s.stage, "ticks": list(s.ticks)} for s in self.sources],
        }

    def with_max_ticks(self, max_ticks: int) -> "SimConfig":
        """Shorten or extend the horizon, dropping emissions that fall outside it."""
        sources = tuple(
            Source(s.stage, tuple(t for t in s.ticks if t < max_ticks)) for s in self.sources
        )
        return SimConfig(max_ticks, sources, self.seed)

    def emissions(self) -> int:
        return sum(len(s.ticks) for s in self.sources)


@dataclass(frozen=True)
class Token:
    id: int
    label: str
    birth_tick: int
    location: str
    state: str  # "active" | "departed"
    origin: str  # "source" | "trigger" | "copy" | "pulse"
    end_tick: Optional[int] = None

    @property
    def is_pulse(self) -> bool:
        return self.origin == "pulse"


@dataclass(frozen=True, order=True)
class Activation:
    tick: int
    stage: str
    token: int


@dataclass(frozen=True)
class MetaEventRecord:
    event_id: str
    occurrence_index: int
    start_tick: int
    end_tick: int
    tokens: tuple[int, ...] = ()
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class SimLog:
    config_echo: SimConfig
    model_fingerprint: str
    activations: tuple[Activation, ...] = ()
    meta_events: tuple[MetaEventRecord, ...] = ()
    tokens: tuple[Token, ...] = ()
    notes: tuple[str, ...] = ()
    halt_tick: int = 0

    def occurrences(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for m in self.meta_events:
            counts[m.event_id] = counts.get(m.event_id, 0) + 1
        return counts

    def first_occurrence(self, event_id: str) -> Optional[MetaEventRecord]:
        return next((m for m in self.meta_events if m.event_id == event_id), None)

    @property
    def things(self) -> tuple[Token, ...]:
        """Tokens that carry a thing (everything but trigger pulses)."""
        return tuple(t for t in self.tokens if not t.is_pulse)

    def dumps(self) -> str:
        return dumps_log(self)


# --------------------------------------------------------------------------
# Simulation


@dataclass
class _Tok:
    id: int
    label: str
    birth_tick: int
    location: str
    origin: str
    state: str = "active"
    end_tick: Optional[int] = None

    def freeze(self) -> Token:
        return Token(
            self.id, self.label, self.birth_tick, self.location, self.state, self.origin, self.end_tick
        )


def simulate(model: Model, config: SimConfig, *, check: bool = True) -> SimLog:
    """Run ``model`` under ``config`` and return the full log.

    With ``check`` (the default) the model must pass every validator without
    errors, otherwise :class:`UnvalidatedModel` is raised.
    """
    if check:
        report = validate_all(model)
        if report.errors:
            raise UnvalidatedModel(report)
    for src in config.sources:
        stage = model.stage_index.get(src.stage)
        if stage is None or stage.kind is not ActionKind.CREATE:
            raise ConfigError(f"source {src.stage!r} is not a create stage of the model")

    notes: list[str] = []
    if not config.sources:
        notes.append("warning: no sources configured; nothing was simulated")

    emissions: dict[int, list[str]] = defaultdict(list)
    for src in sorted(config.sources, key=lambda s: s.stage):
        for t in sorted(src.ticks):
            emissions[t].append(src.stage)
    advances: dict[int, list[tuple[str, int]]] = defaultdict(list)
    fired: dict[int, list[str]] = defaultdict(list)

    tokens: dict[int, _Tok] = {}
    activations: list[Activation] = []
    next_id = 1

    def new_token(stage: str, tick: int, origin: str, label: str) -> int:
        nonlocal next_id
        tid = next_id
        next_id += 1
        tokens[tid] = _Tok(tid, label, tick, stage, origin)
        return tid

    def birth_label(stage: str) -> str:
        return model.thimac(model.stage(stage).owner).display_name

    tick = 0
    while tick < config.max_ticks:
        pending = [k for d in (advances, emissions, fired) for k in d]
        if not pending:
            break
        tick = min(pending)
        if tick >= config.max_ticks:
            break
        arriving: list[tuple[str, int]] = []

        for stage, tid in sorted(advances.pop(tick, ())):
            tok = tokens[tid]
            flows = model.outgoing_flows(stage)
            if not flows:
                tok.state, tok.end_tick = "departed", tick
                continue
            for n, f in enumerate(flows):
                if n == 0:
                    carrier = tid
                else:
                    carrier = new_token(f.target, tick, "copy", tok.label)
                if f.label is not None:
                    tokens[carrier].label = f.label
                arriving.append((f.target, carrier))

        for stage in emissions.pop(tick, ()):
            arriving.append((stage, new_token(stage, tick, "source", birth_label(stage))))

        for target in fired.pop(tick, ()):
            if model.stage(target).kind is ActionKind.CREATE:
                arriving.append((target, new_token(target, tick, "trigger", birth_label(target))))
            else:
                pid = new_token(target, tick, "pulse", "pulse")
                tokens[pid].state, tokens[pid].end_tick = "departed", tick
                arriving.append((target, pid))

        for stage, tid in sorted(arriving):
            activations.append(Activation(tick, stage, tid))
            tok = tokens[tid]
            tok.location = stage
            for trig in model.outgoing_triggers(stage):
                fired[tick + 1].append(trig.target)
            if tok.origin != "pulse":
                advances[tick + model.stage(stage).cost_ticks].append((stage, tid))
        tick += 1

    halt = min(tick, config.max_ticks)
    meta, open_notes = detect_events(model, activations)
    notes.extend(open_notes)
    return SimLog(
        config_echo=config,
        model_fingerprint=model_fingerprint(model),
        activations=tuple(activations),
        meta_events=tuple(meta),
        tokens=tuple(tokens[k].freeze() for k in sorted(tokens)),
        notes=tuple(notes),
        halt_tick=halt,
    )


def detect_events(
    model: Model, activations: Iterable[Activation]
) -> tuple[list[MetaEventRecord], list[str]]:
    """Cut the activation sequence into event occurrences.

    An occurrence opens at the first activation of any region stage once the
    previous one has closed, and closes on the activation that completes
    coverage of the whole region.
    """
    member_of: dict[str, list[str]] = defaultdict(list)
    regions: dict[str, frozenset[str]] = {}
    for e in model.events:
        regions[e.id] = frozenset(s for s in e.region if s in model.stage_index)
        for s in regions[e.id]:
            member_of[s].append(e.id)

    open_: dict[str, tuple[int, set[str], set[int]]] = {}
    count: dict[str, int] = defaultdict(int)
    records: list[MetaEventRecord] = []
    for act in activations:
        for eid in member_of.get(act.stage, ()):
            if eid not in open_:
                open_[eid] = (act.tick, set(), set())
            start, covered, toks = open_[eid]
            covered.add(act.stage)
            toks.add(act.token)
            if covered == regions[eid]:
                del open_[eid]
                count[eid] += 1
                notes = []
                hint = model.event(eid).time.duration_hint
                if hint is not None and act.tick - start > hint:
                    notes.append(f"alert: took {act.tick - start} ticks, hint {hint}")
                records.append(
                    MetaEventRecord(eid, count[eid], start, act.tick, tuple(sorted(toks)), tuple(notes))
                )
    leftovers = [
        f"warning: {eid} occurrence {count[eid] + 1} opened at tick {open_[eid][0]} never completed"
        for eid in sorted(open_)
    ]
    return records, leftovers


# --------------------------------------------------------------------------
# Checks and projections


def check_behavioral_consistency(log: SimLog, model: Model) -> ValidationReport:
    """Every declared A -> B must see A's first occurrence end no later than B's starts."""
    if log.model_fingerprint != model_fingerprint(model):
        raise MismatchedLog("log was produced from a different model")
    found = []
    for b in model.behavior:
        first_a, first_b = log.first_occurrence(b.source), log.first_occurrence(b.target)
        if first_a is None or first_b is None:
            continue
        if first_a.end_tick > first_b.start_tick:
            found.append(
                Violation(
                    "BEHAVIOR_ORDER_VIOLATION",
                    f"{b.source}->{b.target}",
                    f"{b.source} ended at tick {first_a.end_tick} but {b.target} started at {first_b.start_tick}",
                    CODES["BEHAVIOR_ORDER_VIOLATION"],
                )
            )
    return build_report(found, len(model.behavior))


def replay_window(log: SimLog, from_tick: int, to_tick: int) -> SimLog:
    """Project the log onto ticks ``[from_tick, to_tick]``."""
    if not 0 <= from_tick <= to_tick:
        raise ValueError(f"bad window [{from_tick}, {to_tick}]")
    acts = tuple(a for a in log.activations if from_tick <= a.tick <= to_tick)
    meta = tuple(m for m in log.meta_events if m.start_tick <= to_tick and m.end_tick >= from_tick)
    seen = {a.token for a in acts}
    return replace(
        log,
        activations=acts,
        meta_events=meta,
        tokens=tuple(t for t in log.tokens if t.id in seen),
    )


# --------------------------------------------------------------------------
# Line format


def _esc(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def _unesc(text: str) -> str:
    out, i = [], 0
    while i < len(text):
        c = text[i]
        if c == "\\" and i + 1 < len(text):
            out.append({"t": "\t", "n": "\n"}.get(text[i + 1], text[i + 1]))
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


def _ints(values: Iterable[int]) -> str:
    return ",".join(str(v) for v in values) or "-"


def _parse_ints(field_: str) -> tuple[int, ...]:
    return () if field_ == "-" else tuple(int(v) for v in field_.split(","))


def dumps_log(log: SimLog) -> str:
    """Tab-separated, one record per line; byte-stable for golden comparison."""
    cfg = log.config_echo
    rows = [
        ("tmlog", LOG_FORMAT_VERSION),
        ("config", "max_ticks", cfg.max_ticks),
        ("config", "seed", cfg.seed),
        ("config", "model", log.model_fingerprint),
    ]
    rows += [("source", s.stage, _ints(s.ticks)) for s in cfg.sources]
    rows.append(("halt", log.halt_tick))
    rows += [("note", _esc(n)) for n in log.notes]
    rows += [
        (
            "token",
            t.id,
            t.origin,
            t.birth_tick,
            "-" if t.end_tick is None else t.end_tick,
            t.state,
            t.location,
            _esc(t.label),
        )
        for t in log.tokens
    ]
    rows += [("act", a.tick, a.stage, a.token) for a in log.activations]
    rows += [
        (
            "meta",
            m.event_id,
            m.occurrence_index,
            m.start_tick,
            m.end_tick,
            _ints(m.tokens),
            _esc(" | ".join(m.notes)),
        )
        for m in log.meta_events
    ]
    return "".join("\t".join(str(x) for x in row) + "\n" for row in rows)


def loads_log(text: str) -> SimLog:
    cfg: dict = {"sources": []}
    fingerprint = ""
    halt = 0
    notes, tokens, acts, meta = [], [], [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line:
            continue
        f = line.split("\t")
        try:
            tag = f[0]
            if tag == "tmlog":
                if int(f[1]) != LOG_FORMAT_VERSION:
                    raise ValueError(f"unsupported log version {f[1]}")
            elif tag == "config":
                if f[1] == "model":
                    fingerprint = f[2]
                else:
                    cfg[f[1]] = int(f[2])
            elif tag == "source":
                cfg["sources"].append(Source(f[1], _parse_ints(f[2])))
            elif tag == "halt":
                halt = int(f[1])
            elif tag == "note":
                notes.append(_unesc(f[1]))
            elif tag == "token":
                end = None if f[4] == "-" else int(f[4])
                tokens.append(Token(int(f[1]), _unesc(f[7]), int(f[3]), f[6], f[5], f[2], end))
            elif tag == "act":
                acts.append(Activation(int(f[1]), f[2], int(f[3])))
            elif tag == "meta":
                note_field = _unesc(f[6])
                meta.append(
                    MetaEventRecord(
                        f[1],
                        int(f[2]),
                        int(f[3]),
                        int(f[4]),
                        _parse_ints(f[5]),
                        tuple(note_field.split(" | ")) if note_field else (),
                    )
                )
            else:
                raise ValueError(f"unknown record {tag!r}")
        except (IndexError, ValueError) as e:
            raise ValueError(f"log line {lineno}: {e}") from None
    config = SimConfig(cfg.get("max_ticks", 0), tuple(cfg["sources"]), cfg.get("seed", 0))
    return SimLog(config, fingerprint, tuple(acts), tuple(meta), tuple(tokens), tuple(notes), halt)
