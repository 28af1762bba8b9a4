"""In-memory thinging-machine models.

A model is a forest of thimacs.  Each thimac hosts at most one stage per
generic action (transfer once per direction) and may nest further thimacs.
Stages are wired by solid flow arrows and dashed trigger arrows; events carve
connected regions out of the static wiring, and behavior edges order events.

Everything here is immutable once built.  Cross references are stored as ids
(the dotted stage path, the dotted thimac path, the arrow id, the event id) so
models can be rewritten with :func:`dataclasses.replace` without chasing
object graphs.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Optional, Sequence, Union


class ActionKind(str, enum.Enum):
    CREATE = "create"
    PROCESS = "process"
    RELEASE = "release"
    TRANSFER = "transfer"
    RECEIVE = "receive"

    def __str__(self) -> str:
        return self.value


class Direction(str, enum.Enum):
    IN = "in"
    OUT = "out"
    NONE = "none"

    def __str__(self) -> str:
        return self.value


KIND_WORDS = frozenset(k.value for k in ActionKind)
DIRECTION_WORDS = frozenset({"in", "out"})
IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class ModelError(Exception):
    """Base class for construction and lookup failures.

    ``span`` is filled in by callers that know where the offending directive
    came from (the DSL parser); the model layer itself never sets it.
    """

    def __init__(self, message: str, span=None):
        super().__init__(message)
        self.message = message
        self.span = span


class DuplicateId(ModelError):
    pass


class DanglingReference(ModelError):
    pass


class DuplicateStageKind(ModelError):
    pass


class InvalidDeclaration(ModelError):
    pass


class NotFound(ModelError, LookupError):
    pass


class AmbiguousPath(ModelError):
    pass


# --------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class Stage:
    id: str
    owner: str
    kind: ActionKind
    direction: Direction = Direction.NONE
    cost_ticks: int = 1
    annotation: Optional[int] = None

    @property
    def slot(self) -> str:
        """Kind plus direction, e.g. ``transfer.in``; unique within a thimac."""
        if self.kind is ActionKind.TRANSFER:
            return f"{self.kind.value}.{self.direction.value}"
        return self.kind.value


@dataclass(frozen=True)
class Thimac:
    path: str
    name: str
    display_name: str
    parent: Optional[str] = None
    children: tuple[str, ...] = ()
    stages: tuple[str, ...] = ()

    @property
    def is_container(self) -> bool:
        return not self.stages

    @property
    def is_purely_static(self) -> bool:
        # a single potential action and nothing nested
        return len(self.stages) == 1 and not self.children


@dataclass(frozen=True)
class FlowArrow:
    id: str
    source: str
    target: str
    label: Optional[str] = None
    annotation: Optional[int] = None


@dataclass(frozen=True)
class TriggerArrow:
    id: str
    source: str
    target: str
    label: Optional[str] = None
    annotation: Optional[int] = None


Arrow = Union[FlowArrow, TriggerArrow]


@dataclass(frozen=True)
class TimeAttrs:
    declared_order: Optional[int] = None
    duration_hint: Optional[int] = None


@dataclass(frozen=True)
class Event:
    id: str
    description: str = ""
    region: tuple[str, ...] = ()
    time: TimeAttrs = field(default_factory=TimeAttrs)


@dataclass(frozen=True)
class BehaviorEdge:
    source: str
    target: str


@dataclass(frozen=True)
class Model:
    name: str
    thimacs: tuple[Thimac, ...] = ()
    stages: tuple[Stage, ...] = ()
    flows: tuple[FlowArrow, ...] = ()
    triggers: tuple[TriggerArrow, ...] = ()
    events: tuple[Event, ...] = ()
    behavior: tuple[BehaviorEdge, ...] = ()

    # Lookup tables.  cached_property writes straight into __dict__, which a
    # frozen dataclass permits; they never take part in equality.

    @cached_property
    def thimac_index(self) -> dict[str, Thimac]:
        return {t.path: t for t in self.thimacs}

    @cached_property
    def stage_index(self) -> dict[str, Stage]:
        return {s.id: s for s in self.stages}

    @cached_property
    def event_index(self) -> dict[str, Event]:
        return {e.id: e for e in self.events}

    @cached_property
    def roots(self) -> tuple[Thimac, ...]:
        return tuple(t for t in self.thimacs if t.parent is None)

    @cached_property
    def annotations(self) -> dict[int, str]:
        """Figure step number -> id of the stage or arrow it is bound to."""
        out: dict[int, str] = {}
        for item in (*self.stages, *self.flows, *self.triggers):
            if item.annotation is not None:
                out[item.annotation] = item.id
        return dict(sorted(out.items()))

    @property
    def arrows(self) -> tuple[Arrow, ...]:
        return self.flows + self.triggers

    def stage(self, stage_id: str) -> Stage:
        try:
            return self.stage_index[stage_id]
        except KeyError:
            raise NotFound(f"no stage {stage_id!r}") from None

    def thimac(self, path: str) -> Thimac:
        try:
            return self.thimac_index[path]
        except KeyError:
            raise NotFound(f"no thimac {path!r}") from None

    def event(self, event_id: str) -> Event:
        try:
            return self.event_index[event_id]
        except KeyError:
            raise NotFound(f"no event {event_id!r}") from None

    def subtree(self, path: str) -> Iterator[Thimac]:
        """Pre-order walk of ``path`` and everything nested under it."""
        stack = [self.thimac(path)]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(self.thimac_index[c] for c in reversed(node.children))

    def outgoing_flows(self, stage_id: str) -> tuple[FlowArrow, ...]:
        return self._flows_from.get(stage_id, ())

    def outgoing_triggers(self, stage_id: str) -> tuple[TriggerArrow, ...]:
        return self._triggers_from.get(stage_id, ())

    @cached_property
    def _flows_from(self) -> dict[str, tuple[FlowArrow, ...]]:
        return _group_by_source(self.flows)

    @cached_property
    def _triggers_from(self) -> dict[str, tuple[TriggerArrow, ...]]:
        return _group_by_source(self.triggers)

    def check_invariants(self) -> list[str]:
        """Re-check every structural invariant; returns problems found."""
        problems: list[str] = []
        seen_paths: set[str] = set()
        for t in self.thimacs:
            if t.path in seen_paths:
                problems.append(f"duplicate thimac {t.path}")
            seen_paths.add(t.path)
            if t.parent is not None and t.parent not in self.thimac_index:
                problems.append(f"thimac {t.path} has unknown parent {t.parent}")
            slots = [self.stage_index[s].slot for s in t.stages if s in self.stage_index]
            if len(slots) != len(set(slots)):
                problems.append(f"thimac {t.path} repeats a stage kind")
        if len(self.stage_index) != len(self.stages):
            problems.append("stage ids are not unique")
        for s in self.stages:
            if (s.kind is ActionKind.TRANSFER) != (s.direction is not Direction.NONE):
                problems.append(f"stage {s.id} has direction {s.direction} for kind {s.kind}")
            if s.cost_ticks < 1:
                problems.append(f"stage {s.id} has non-positive cost")
            if s.owner not in self.thimac_index or s.id not in self.thimac_index[s.owner].stages:
                problems.append(f"stage {s.id} is not hosted by its owner")
        for a in self.arrows:
            for end in (a.source, a.target):
                if end not in self.stage_index:
                    problems.append(f"arrow {a.id} references unknown stage {end}")
            if a.source == a.target:
                problems.append(f"arrow {a.id} is a self-loop")
        labels = [
            x.annotation for x in (*self.stages, *self.arrows) if x.annotation is not None
        ]
        if len(labels) != len(set(labels)):
            problems.append("annotation labels are not unique")
        if any(n < 1 for n in labels):
            problems.append("annotation labels must be positive")
        if len(self.event_index) != len(self.events):
            problems.append("event ids are not unique")
        return problems


def _group_by_source(arrows):
    out: dict[str, list] = {}
    for a in arrows:
        out.setdefault(a.source, []).append(a)
    return {k: tuple(v) for k, v in out.items()}


# --------------------------------------------------------------------------
# Paths


def stage_path(thimac_path: str, kind: ActionKind, direction: Direction = Direction.NONE) -> str:
    if kind is ActionKind.TRANSFER:
        return f"{thimac_path}.{kind.value}.{direction.value}"
    return f"{thimac_path}.{kind.value}"


def split_stage_path(path: str) -> tuple[str, ActionKind, Direction]:
    """Split ``A.B.transfer.in`` into (``A.B``, transfer, in).

    Raises :class:`InvalidDeclaration` for anything that is not a well-formed
    stage path; existence is not checked here.
    """
    parts = path.split(".")
    if parts and parts[-1] in DIRECTION_WORDS:
        if len(parts) < 3 or parts[-2] != ActionKind.TRANSFER.value:
            raise InvalidDeclaration(f"direction only follows 'transfer' in {path!r}")
        owner, kind, direction = parts[:-2], ActionKind.TRANSFER, Direction(parts[-1])
    else:
        if len(parts) < 2 or parts[-1] not in KIND_WORDS:
            raise InvalidDeclaration(f"{path!r} does not end in a stage kind")
        kind = ActionKind(parts[-1])
        if kind is ActionKind.TRANSFER:
            raise InvalidDeclaration(f"transfer stage needs a direction in {path!r}")
        owner, direction = parts[:-1], Direction.NONE
    for p in owner:
        if not IDENT_RE.match(p) or p in KIND_WORDS or p in DIRECTION_WORDS:
            raise InvalidDeclaration(f"bad thimac name {p!r} in {path!r}")
    return ".".join(owner), kind, direction


def find_stage(model: Model, path: str) -> Stage:
    """Resolve ``thimac(.subthimac)*.kind[.direction]`` to its stage."""
    owner, kind, direction = split_stage_path(path)
    thimac = model.thimac_index.get(owner)
    if thimac is None:
        raise NotFound(f"no thimac {owner!r}")
    hits = [
        model.stage_index[s]
        for s in thimac.stages
        if model.stage_index[s].kind is kind and model.stage_index[s].direction is direction
    ]
    if not hits:
        raise NotFound(f"thimac {owner!r} has no {kind.value} stage")
    if len(hits) > 1:
        raise AmbiguousPath(f"{path!r} matches {len(hits)} stages")
    return hits[0]


def boundary_of(model: Model, thimac: Union[Thimac, str]) -> set[FlowArrow]:
    """Flows with exactly one endpoint inside the thimac's subtree."""
    path = thimac.path if isinstance(thimac, Thimac) else thimac
    inside = {s for t in model.subtree(path) for s in t.stages}
    return {f for f in model.flows if (f.source in inside) != (f.target in inside)}


# --------------------------------------------------------------------------
# Construction


@dataclass(frozen=True)
class ThimacDecl:
    path: str
    display_name: Optional[str] = None
    span: object = None


@dataclass(frozen=True)
class StageDecl:
    thimac: str
    kind: ActionKind
    direction: Direction = Direction.NONE
    cost_ticks: int = 1
    annotation: Optional[int] = None
    span: object = None


@dataclass(frozen=True)
class FlowDecl:
    source: str
    target: str
    label: Optional[str] = None
    annotation: Optional[int] = None
    span: object = None


@dataclass(frozen=True)
class TriggerDecl:
    source: str
    target: str
    label: Optional[str] = None
    annotation: Optional[int] = None
    span: object = None


@dataclass(frozen=True)
class EventDecl:
    id: str
    description: str = ""
    region: tuple[str, ...] = ()
    declared_order: Optional[int] = None
    duration_hint: Optional[int] = None
    span: object = None


@dataclass(frozen=True)
class BehaviorDecl:
    source: str
    target: str
    span: object = None


Directive = Union[ThimacDecl, StageDecl, FlowDecl, TriggerDecl, EventDecl, BehaviorDecl]


class ModelBuilder:
    """Accumulates directives and produces a canonical :class:`Model`.

    Structure (thimacs, stages, arrows) is checked eagerly.  Event regions and
    behavior endpoints are only checked for syntax: whether they resolve is a
    validator concern, so a mutated model can still be built and reported on.
    """

    def __init__(self, name: str = "M"):
        if not IDENT_RE.match(name):
            raise InvalidDeclaration(f"bad model name {name!r}")
        self.name = name
        self._thimacs: dict[str, dict] = {}
        self._stages: dict[str, Stage] = {}
        self._flows: list[FlowArrow] = []
        self._triggers: list[TriggerArrow] = []
        self._events: dict[str, Event] = {}
        self._behavior: list[BehaviorEdge] = []
        self._labels: dict[int, str] = {}

    def apply(self, directive: Directive) -> None:
        if isinstance(directive, ThimacDecl):
            self.add_thimac(directive.path, directive.display_name)
        elif isinstance(directive, StageDecl):
            self.add_stage(
                directive.thimac,
                directive.kind,
                directive.direction,
                cost_ticks=directive.cost_ticks,
                annotation=directive.annotation,
            )
        elif isinstance(directive, FlowDecl):
            self.add_flow(directive.source, directive.target, directive.label, directive.annotation)
        elif isinstance(directive, TriggerDecl):
            self.add_trigger(directive.source, directive.target, directive.label, directive.annotation)
        elif isinstance(directive, EventDecl):
            self.add_event(
                directive.id,
                directive.description,
                directive.region,
                declared_order=directive.declared_order,
                duration_hint=directive.duration_hint,
            )
        elif isinstance(directive, BehaviorDecl):
            self.add_behavior(directive.source, directive.target)
        else:
            raise TypeError(f"not a directive: {directive!r}")

    def add_thimac(self, path: str, display_name: Optional[str] = None) -> str:
        parts = path.split(".")
        name = parts[-1]
        if not IDENT_RE.match(name) or name in KIND_WORDS or name in DIRECTION_WORDS:
            raise InvalidDeclaration(f"bad thimac name {name!r}")
        parent = ".".join(parts[:-1]) or None
        if parent is not None and parent not in self._thimacs:
            raise DanglingReference(f"parent thimac {parent!r} is not declared")
        if path in self._thimacs:
            raise DuplicateId(f"thimac {path!r} already declared in this scope")
        self._thimacs[path] = {
            "name": name,
            "display_name": display_name if display_name is not None else name,
            "parent": parent,
            "children": [],
            "stages": [],
        }
        if parent is not None:
            self._thimacs[parent]["children"].append(path)
        return path

    def add_stage(
        self,
        thimac: str,
        kind: Union[ActionKind, str],
        direction: Union[Direction, str, None] = None,
        *,
        cost_ticks: int = 1,
        annotation: Optional[int] = None,
    ) -> str:
        kind = ActionKind(kind)
        direction = Direction(direction) if direction is not None else Direction.NONE
        if thimac not in self._thimacs:
            raise DanglingReference(f"thimac {thimac!r} is not declared")
        if kind is ActionKind.TRANSFER and direction is Direction.NONE:
            raise InvalidDeclaration("a transfer stage needs a direction (in/out)")
        if kind is not ActionKind.TRANSFER and direction is not Direction.NONE:
            raise InvalidDeclaration(f"a {kind.value} stage takes no direction")
        if not isinstance(cost_ticks, int) or cost_ticks < 1:
            raise InvalidDeclaration(f"stage cost must be a positive integer, got {cost_ticks!r}")
        sid = stage_path(thimac, kind, direction)
        if sid in self._stages:
            what = f"transfer-{direction.value}" if kind is ActionKind.TRANSFER else kind.value
            raise DuplicateStageKind(f"thimac {thimac!r} already has a {what} stage")
        self._claim_label(annotation, sid)
        self._stages[sid] = Stage(sid, thimac, kind, direction, cost_ticks, annotation)
        self._thimacs[thimac]["stages"].append(sid)
        return sid

    def add_flow(self, source, target, label=None, annotation=None) -> str:
        aid = f"flow{len(self._flows) + 1}"
        self._check_arrow(source, target, "flow")
        self._claim_label(annotation, aid)
        self._flows.append(FlowArrow(aid, source, target, label, annotation))
        return aid

    def add_trigger(self, source, target, label=None, annotation=None) -> str:
        aid = f"trigger{len(self._triggers) + 1}"
        self._check_arrow(source, target, "trigger")
        self._claim_label(annotation, aid)
        self._triggers.append(TriggerArrow(aid, source, target, label, annotation))
        return aid

    def add_event(
        self,
        event_id: str,
        description: str = "",
        region: Iterable[str] = (),
        *,
        declared_order: Optional[int] = None,
        duration_hint: Optional[int] = None,
    ) -> str:
        if not IDENT_RE.match(event_id):
            raise InvalidDeclaration(f"bad event id {event_id!r}")
        if event_id in self._events:
            raise DuplicateId(f"event {event_id!r} already declared")
        region = tuple(region)
        for member in region:
            split_stage_path(member)
        if len(set(region)) != len(region):
            raise DuplicateId(f"event {event_id!r} lists a region member twice")
        if declared_order is None:
            declared_order = len(self._events) + 1
        for value, what in ((declared_order, "order"), (duration_hint, "duration")):
            if value is not None and (not isinstance(value, int) or value < 1):
                raise InvalidDeclaration(f"event {what} must be a positive integer")
        self._events[event_id] = Event(
            event_id, description, region, TimeAttrs(declared_order, duration_hint)
        )
        return event_id

    def add_behavior(self, source: str, target: str) -> None:
        for end in (source, target):
            if not IDENT_RE.match(end):
                raise InvalidDeclaration(f"bad event id {end!r}")
        edge = BehaviorEdge(source, target)
        if edge in self._behavior:
            raise DuplicateId(f"behavior {source} -> {target} already declared")
        self._behavior.append(edge)

    def build(self) -> Model:
        ordered: list[Thimac] = []

        def visit(path: str) -> None:
            rec = self._thimacs[path]
            ordered.append(
                Thimac(
                    path,
                    rec["name"],
                    rec["display_name"],
                    rec["parent"],
                    tuple(rec["children"]),
                    tuple(rec["stages"]),
                )
            )
            for child in rec["children"]:
                visit(child)

        for path, rec in self._thimacs.items():
            if rec["parent"] is None:
                visit(path)
        stages = tuple(self._stages[s] for t in ordered for s in t.stages)
        return Model(
            self.name,
            tuple(ordered),
            stages,
            tuple(self._flows),
            tuple(self._triggers),
            tuple(self._events.values()),
            tuple(self._behavior),
        )

    def _check_arrow(self, source: str, target: str, what: str) -> None:
        for end in (source, target):
            split_stage_path(end)
            if end not in self._stages:
                raise DanglingReference(f"{what} endpoint {end!r} is not a declared stage")
        if source == target:
            raise InvalidDeclaration(f"{what} from {source!r} to itself")

    def _claim_label(self, annotation: Optional[int], owner: str) -> None:
        if annotation is None:
            return
        if not isinstance(annotation, int) or annotation < 1:
            raise InvalidDeclaration(f"annotation must be a positive integer, got {annotation!r}")
        if annotation in self._labels:
            raise DuplicateId(f"annotation @{annotation} already bound to {self._labels[annotation]}")
        self._labels[annotation] = owner


def build_model(directives: Sequence[Directive] = (), name: str = "M") -> Model:
    """Apply ``directives`` in order; the first failure propagates."""
    builder = ModelBuilder(name)
    for d in directives:
        builder.apply(d)
    return builder.build()

