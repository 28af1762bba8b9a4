"""Events over the static model: dataflow precedence, declared-behavior
support, and event merging."""

from __future__ import annotations

import dataclasses
from typing import Iterable

import networkx as nx

from .model import BehaviorEdge, Event, Model, ModelError, TimeAttrs
from .validate import ValidationReport, Violation, build_report, region_connected, CODES


class UnknownEvent(ModelError, LookupError):
    pass


class MergeDisconnected(ModelError):
    pass


def derive_precedence(model: Model) -> set[BehaviorEdge]:
    """A -> B whenever a flow or trigger leads from A's region into B's.

    No transitive reduction is applied.
    """
    member_of: dict[str, list[str]] = {}
    for e in model.events:
        for s in e.region:
            member_of.setdefault(s, []).append(e.id)
    edges: set[BehaviorEdge] = set()
    for arrow in model.arrows:
        for a in member_of.get(arrow.source, ()):
            for b in member_of.get(arrow.target, ()):
                if a != b:
                    edges.add(BehaviorEdge(a, b))
    return edges


def precedence_closure(edges: Iterable[BehaviorEdge]) -> set[tuple[str, str]]:
    g = nx.DiGraph()
    g.add_edges_from((e.source, e.target) for e in edges)
    return {(a, b) for a in g for b in nx.descendants(g, a)}


def check_declared_behavior(model: Model) -> ValidationReport:
    """Flag declared behavior edges that dataflow does not account for."""
    reachable = precedence_closure(derive_precedence(model))
    found = [
        Violation(
            "DECLARED_UNSUPPORTED",
            f"{b.source}->{b.target}",
            f"no flow or trigger path leads from {b.source} to {b.target}",
            CODES["DECLARED_UNSUPPORTED"],
        )
        for b in model.behavior
        if (b.source, b.target) not in reachable
    ]
    return build_report(found, len(model.behavior))


def merge_events(model: Model, ids: Iterable[str], new_id: str) -> Model:
    """Replace the named events by one event covering the union of their regions.

    The merged event sits where the earliest of the merged events was declared.
    Behavior edges are re-targeted; self-loops and duplicates this produces
    are dropped.
    """
    ids = set(ids)
    if not ids:
        raise UnknownEvent("nothing to merge")
    unknown = sorted(ids - set(model.event_index))
    if unknown:
        raise UnknownEvent(f"unknown event(s): {', '.join(unknown)}")
    if new_id in model.event_index and new_id not in ids:
        raise ModelError(f"event {new_id!r} already exists")

    parts = [e for e in model.events if e.id in ids]
    region: list[str] = []
    for e in parts:
        region.extend(s for s in e.region if s not in region)
    if not region_connected(model, [s for s in region if s in model.stage_index]):
        raise MergeDisconnected(f"union of {', '.join(sorted(ids))} is not connected")

    orders = [e.time.declared_order for e in parts if e.time.declared_order is not None]
    hints = [e.time.duration_hint for e in parts]
    merged = Event(
        new_id,
        "; ".join(e.description for e in parts if e.description),
        tuple(region),
        TimeAttrs(
            min(orders) if orders else None,
            sum(hints) if all(h is not None for h in hints) else None,
        ),
    )

    events: list[Event] = []
    for e in model.events:
        if e.id not in ids:
            events.append(e)
        elif e is parts[0]:
            events.append(merged)

    def rename(x: str) -> str:
        return new_id if x in ids else x

    behavior: list[BehaviorEdge] = []
    for b in model.behavior:
        edge = BehaviorEdge(rename(b.source), rename(b.target))
        if edge.source != edge.target and edge not in behavior:
            behavior.append(edge)
    return dataclasses.replace(model, events=tuple(events), behavior=tuple(behavior))
