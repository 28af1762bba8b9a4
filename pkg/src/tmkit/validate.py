"""Static, event and behavior legality checks.

Findings are data: every check returns a :class:`ValidationReport` and never
raises on a bad model.  Violation codes are stable identifiers meant for CI.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import networkx as nx

from .model import ActionKind, Direction, Model

STRICT = "strict"
LENIENT = "lenient"

ERROR = "error"
WARNING = "warning"

# code -> severity in strict mode
CODES = {
    "INTRA_ADJACENCY": ERROR,
    "BOUNDARY_RULE": ERROR,
    "TRIGGER_RULE": ERROR,
    "EMPTY_THIMAC": WARNING,
    "REGION_MEMBER": ERROR,
    "REGION_CONNECTED": ERROR,
    "REGION_EMPTY": ERROR,
    "EVENT_ORDER": ERROR,
    "BEHAVIOR_DANGLING": ERROR,
    "BEHAVIOR_CYCLE": ERROR,
    "BEHAVIOR_ISOLATED": WARNING,
    "DECLARED_UNSUPPORTED": WARNING,
    "BEHAVIOR_ORDER_VIOLATION": ERROR,
}

# (kind, direction) slot -> slots a flow may reach inside the same thimac
_IN = (ActionKind.TRANSFER, Direction.IN)
_OUT = (ActionKind.TRANSFER, Direction.OUT)
_N = Direction.NONE
INTRA_ADJACENCY = {
    (ActionKind.CREATE, _N): {(ActionKind.PROCESS, _N), (ActionKind.RELEASE, _N)},
    (ActionKind.RECEIVE, _N): {(ActionKind.PROCESS, _N), (ActionKind.RELEASE, _N)},
    (ActionKind.PROCESS, _N): {(ActionKind.RELEASE, _N)},
    (ActionKind.RELEASE, _N): {_OUT},
    _IN: {(ActionKind.RECEIVE, _N)},
    _OUT: set(),
}


@dataclass(frozen=True)
class Violation:
    code: str
    subject: str
    message: str
    severity: str = ERROR


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()
    checked_rules: int = 0

    @property
    def errors(self) -> tuple[Violation, ...]:
        return tuple(v for v in self.violations if v.severity == ERROR)

    @property
    def warnings(self) -> tuple[Violation, ...]:
        return tuple(v for v in self.violations if v.severity == WARNING)

    @property
    def ok(self) -> bool:
        return not self.errors

    def codes(self) -> set[str]:
        return {v.code for v in self.violations}

    def merge(self, other: "ValidationReport") -> "ValidationReport":
        return build_report(self.violations + other.violations, self.checked_rules + other.checked_rules)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "checked_rules": self.checked_rules,
            "violations": [
                {"code": v.code, "severity": v.severity, "subject": v.subject, "message": v.message}
                for v in self.violations
            ],
        }


def build_report(violations: Iterable[Violation], checked: int) -> ValidationReport:
    ordered = sorted(set(violations), key=lambda v: (v.code, v.subject, v.message))
    return ValidationReport(tuple(ordered), checked)


def _violation(code: str, subject: str, message: str, mode: str = STRICT) -> Violation:
    severity = CODES[code]
    if mode == LENIENT and code == "INTRA_ADJACENCY":
        severity = WARNING
    return Violation(code, subject, message, severity)


def flow_is_legal(model: Model, source: str, target: str) -> tuple[bool, str]:
    """Classify a flow by the adjacency table; returns (legal, rule code)."""
    a, b = model.stage(source), model.stage(target)
    if a.owner == b.owner:
        return (b.kind, b.direction) in INTRA_ADJACENCY[(a.kind, a.direction)], "INTRA_ADJACENCY"
    return (a.kind, a.direction) == _OUT and (b.kind, b.direction) == _IN, "BOUNDARY_RULE"


def validate_static(model: Model, mode: str = STRICT) -> ValidationReport:
    if mode not in (STRICT, LENIENT):
        raise ValueError(f"unknown mode {mode!r}")
    found: list[Violation] = []
    checked = 0
    for f in model.flows:
        checked += 1
        legal, code = flow_is_legal(model, f.source, f.target)
        if not legal:
            a, b = model.stage(f.source), model.stage(f.target)
            if code == "INTRA_ADJACENCY":
                msg = f"{a.slot} may not flow to {b.slot} inside {a.owner}"
            else:
                msg = f"{a.slot} of {a.owner} may not flow to {b.slot} of {b.owner}; cross-thimac flows go transfer.out -> transfer.in"
            found.append(_violation(code, f.id, msg, mode))
    flow_pairs = {(f.source, f.target) for f in model.flows}
    for t in model.triggers:
        checked += 1
        if t.source == t.target:
            found.append(_violation("TRIGGER_RULE", t.id, "trigger loops onto its own stage"))
        elif (t.source, t.target) in flow_pairs:
            found.append(
                _violation("TRIGGER_RULE", t.id, "trigger duplicates a flow between the same stages")
            )
    for th in model.thimacs:
        checked += 1
        if not th.stages and not th.children:
            found.append(_violation("EMPTY_THIMAC", th.path, "thimac has no stages and no sub-thimacs"))
    return build_report(found, checked)


def region_graph(model: Model, region: Iterable[str]) -> nx.Graph:
    """Undirected graph of region stages and arrows with both ends in the region."""
    members = set(region)
    g = nx.Graph()
    g.add_nodes_from(members)
    g.add_edges_from(
        (a.source, a.target) for a in model.arrows if a.source in members and a.target in members
    )
    return g


def region_connected(model: Model, region: Iterable[str]) -> bool:
    g = region_graph(model, region)
    return g.number_of_nodes() > 0 and nx.is_connected(g)


def validate_events(model: Model) -> ValidationReport:
    found: list[Violation] = []
    checked = 0
    orders: dict[int, str] = {}
    for e in model.events:
        checked += 3
        if not e.region:
            found.append(_violation("REGION_EMPTY", e.id, "event region is empty"))
            continue
        missing = [m for m in e.region if m not in model.stage_index]
        for m in missing:
            found.append(_violation("REGION_MEMBER", e.id, f"region member {m} is not a stage"))
        present = [m for m in e.region if m in model.stage_index]
        if present and not region_connected(model, present):
            found.append(
                _violation("REGION_CONNECTED", e.id, "region is not weakly connected by its arrows")
            )
        n = e.time.declared_order
        if n is not None:
            checked += 1
            if n in orders:
                found.append(
                    _violation("EVENT_ORDER", e.id, f"declared order {n} already used by {orders[n]}")
                )
            else:
                orders[n] = e.id
    return build_report(found, checked)


def validate_behavior(model: Model) -> ValidationReport:
    found: list[Violation] = []
    checked = 0
    declared = set(model.event_index)
    g = nx.DiGraph()
    g.add_nodes_from(declared)
    for b in model.behavior:
        checked += 1
        dangling = [x for x in (b.source, b.target) if x not in declared]
        for x in dangling:
            found.append(
                _violation("BEHAVIOR_DANGLING", f"{b.source}->{b.target}", f"{x} is not a declared event")
            )
        if not dangling:
            g.add_edge(b.source, b.target)
    checked += 1
    for scc in nx.strongly_connected_components(g):
        if len(scc) > 1 or any(g.has_edge(n, n) for n in scc):
            members = sorted(scc)
            found.append(
                _violation("BEHAVIOR_CYCLE", members[0], f"behavior cycle through {', '.join(members)}")
            )
    touched = {x for b in model.behavior for x in (b.source, b.target)}
    for e in model.events:
        checked += 1
        if e.id not in touched:
            found.append(_violation("BEHAVIOR_ISOLATED", e.id, "event takes part in no behavior edge"))
    return build_report(found, checked)


def validate_all(model: Model, mode: str = STRICT) -> ValidationReport:
    """Static, event and behavior checks in one report."""
    return validate_static(model, mode).merge(validate_events(model)).merge(validate_behavior(model))
