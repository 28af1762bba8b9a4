"""Graphviz DOT rendering and JSON interchange for models and logs."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

from .model import (
    ActionKind,
    BehaviorEdge,
    Direction,
    Event,
    FlowArrow,
    Model,
    Stage,
    Thimac,
    TimeAttrs,
    TriggerArrow,
)
from .simulate import Activation, MetaEventRecord, SimConfig, SimLog, Source, Token

MODEL_SCHEMA_ID = "tmkit/model/1"
LOG_SCHEMA_ID = "tmkit/simlog/1"

VIEWS = ("static", "dynamic", "behavior")

# qualitative palette, cycled per event
_PALETTE = (
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e",
    "#e6ab02", "#a6761d", "#1f78b4", "#b2df8a", "#fb9a99",
)


@dataclass(frozen=True)
class RenderOptions:
    view: str = "static"
    highlight_events: frozenset[str] = frozenset()
    include_annotations: bool = True

    def __post_init__(self):
        if self.view not in VIEWS:
            raise ValueError(f"unknown view {self.view!r}; expected one of {', '.join(VIEWS)}")


def _id(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def _attrs(**attrs) -> str:
    parts = [f"{k}={_id(str(v))}" for k, v in attrs.items() if v is not None]
    return f" [{', '.join(parts)}]" if parts else ""


def _stage_label(stage: Stage, annotate: bool) -> str:
    text = stage.slot.replace(".", " ")
    if annotate and stage.annotation is not None:
        text += f" ({stage.annotation})"
    return text


def _arrow_label(arrow, annotate: bool):
    bits = []
    if annotate and arrow.annotation is not None:
        bits.append(f"({arrow.annotation})")
    if arrow.label:
        bits.append(arrow.label)
    return " ".join(bits) or None


def to_dot(model: Model, options: RenderOptions = RenderOptions()) -> str:
    """Render a DOT digraph.

    Thimacs become nested clusters, each with an invisible anchor node; flows
    are solid edges, triggers dashed.  The dynamic view adds one box per event
    tied to its region by dotted edges; the behavior view shows only events
    and behavior edges.
    """
    lines = [f"digraph {_id(model.name)} {{", "  compound=true;", "  rankdir=LR;"]
    if options.view == "behavior":
        lines += _behavior_body(model, options)
    else:
        lines += _static_body(model, options)
    lines.append("}")
    return "\n".join(lines) + "\n"


def _event_colors(model: Model, options: RenderOptions) -> dict[str, str]:
    chosen = [e.id for e in model.events if not options.highlight_events or e.id in options.highlight_events]
    return {eid: _PALETTE[i % len(_PALETTE)] for i, eid in enumerate(chosen)}


def _static_body(model: Model, options: RenderOptions) -> list[str]:
    annotate = options.include_annotations
    colors = _event_colors(model, options)
    # first overlaid/highlighted event claims the stage outline
    outline: dict[str, str] = {}
    if options.view == "dynamic" or options.highlight_events:
        for e in model.events:
            if e.id in colors:
                for s in e.region:
                    outline.setdefault(s, colors[e.id])

    out: list[str] = []

    def cluster(t: Thimac, depth: int) -> None:
        pad = "  " * depth
        out.append(f"{pad}subgraph {_id('cluster_' + t.path)} {{")
        out.append(f"{pad}  label={_id(t.display_name)};")
        out.append(f"{pad}  {_id('anchor:' + t.path)}{_attrs(shape='point', style='invis')};")
        for sid in t.stages:
            s = model.stage(sid)
            color = outline.get(sid)
            out.append(
                f"{pad}  {_id(sid)}"
                + _attrs(
                    label=_stage_label(s, annotate),
                    shape="box",
                    color=color,
                    penwidth="2" if color else None,
                )
                + ";"
            )
        for child in t.children:
            cluster(model.thimac(child), depth + 1)
        out.append(f"{pad}}}")

    for root in model.roots:
        cluster(root, 1)
    for f in model.flows:
        out.append(f"  {_id(f.source)} -> {_id(f.target)}{_attrs(label=_arrow_label(f, annotate))};")
    for t in model.triggers:
        out.append(
            f"  {_id(t.source)} -> {_id(t.target)}"
            + _attrs(label=_arrow_label(t, annotate), style="dashed")
            + ";"
        )
    if options.view == "dynamic":
        for e in model.events:
            if e.id not in colors:
                continue
            node = _id("event:" + e.id)
            label = f"{e.id}: {e.description}" if e.description else e.id
            out.append(
                f"  {node}"
                + _attrs(label=label, shape="note", style="filled", fillcolor=colors[e.id])
                + ";"
            )
            for s in e.region:
                if s in model.stage_index:
                    out.append(
                        f"  {node} -> {_id(s)}"
                        + _attrs(style="dotted", arrowhead="none", color=colors[e.id])
                        + ";"
                    )
    return out


def _behavior_body(model: Model, options: RenderOptions) -> list[str]:
    out = []
    for e in model.events:
        label = f"{e.id}: {e.description}" if e.description else e.id
        highlighted = e.id in options.highlight_events
        out.append(
            f"  {_id(e.id)}"
            + _attrs(label=label, shape="box", style="bold" if highlighted else None)
            + ";"
        )
    for b in model.behavior:
        out.append(f"  {_id(b.source)} -> {_id(b.target)};")
    return out


# --------------------------------------------------------------------------
# JSON


def model_to_dict(model: Model) -> dict:
    def stage(s: Stage) -> dict:
        return {
            "kind": s.kind.value,
            "direction": s.direction.value,
            "cost_ticks": s.cost_ticks,
            "annotation": s.annotation,
        }

    def thimac(t: Thimac) -> dict:
        return {
            "name": t.name,
            "display_name": t.display_name,
            "stages": [stage(model.stage(s)) for s in t.stages],
            "children": [thimac(model.thimac(c)) for c in t.children],
        }

    def arrow(a) -> dict:
        return {
            "id": a.id,
            "from": a.source,
            "to": a.target,
            "label": a.label,
            "annotation": a.annotation,
        }

    return {
        "schema": MODEL_SCHEMA_ID,
        "name": model.name,
        "thimacs": [thimac(t) for t in model.roots],
        "flows": [arrow(f) for f in model.flows],
        "triggers": [arrow(t) for t in model.triggers],
        "events": [
            {
                "id": e.id,
                "description": e.description,
                "region": list(e.region),
                "declared_order": e.time.declared_order,
                "duration_hint": e.time.duration_hint,
            }
            for e in model.events
        ],
        "behavior": [{"from": b.source, "to": b.target} for b in model.behavior],
        "annotations": {str(k): v for k, v in model.annotations.items()},
    }


def model_from_dict(data: dict) -> Model:
    """Inverse of :func:`model_to_dict`; arrow ids are taken as given."""
    if data.get("schema") != MODEL_SCHEMA_ID:
        raise ValueError(f"not a model document (schema {data.get('schema')!r})")
    thimacs: list[Thimac] = []
    stages: list[Stage] = []

    def walk(node: dict, parent) -> str:
        path = node["name"] if parent is None else f"{parent}.{node['name']}"
        index = len(thimacs)
        thimacs.append(None)  # reserve the pre-order slot
        own = []
        for s in node["stages"]:
            kind, direction = ActionKind(s["kind"]), Direction(s["direction"])
            sid = f"{path}.{s['kind']}" + (f".{s['direction']}" if kind is ActionKind.TRANSFER else "")
            stages.append(Stage(sid, path, kind, direction, s["cost_ticks"], s["annotation"]))
            own.append(sid)
        children = tuple(walk(c, path) for c in node["children"])
        thimacs[index] = Thimac(path, node["name"], node["display_name"], parent, children, tuple(own))
        return path

    for root in data["thimacs"]:
        walk(root, None)
    # stages must follow thimac pre-order, which the nested walk interleaves
    by_owner: dict[str, list[Stage]] = {}
    for s in stages:
        by_owner.setdefault(s.owner, []).append(s)
    ordered = tuple(s for t in thimacs for s in by_owner.get(t.path, ()))
    return Model(
        data["name"],
        tuple(thimacs),
        ordered,
        tuple(FlowArrow(a["id"], a["from"], a["to"], a["label"], a["annotation"]) for a in data["flows"]),
        tuple(TriggerArrow(a["id"], a["from"], a["to"], a["label"], a["annotation"]) for a in data["triggers"]),
        tuple(
            Event(e["id"], e["description"], tuple(e["region"]), TimeAttrs(e["declared_order"], e["duration_hint"]))
            for e in data["events"]
        ),
        tuple(BehaviorEdge(b["from"], b["to"]) for b in data["behavior"]),
    )


def log_to_dict(log: SimLog) -> dict:
    return {
        "schema": LOG_SCHEMA_ID,
        "model_fingerprint": log.model_fingerprint,
        "config": log.config_echo.to_dict(),
        "halt_tick": log.halt_tick,
        "notes": list(log.notes),
        "tokens": [
            {
                "id": t.id,
                "label": t.label,
                "origin": t.origin,
                "birth_tick": t.birth_tick,
                "end_tick": t.end_tick,
                "state": t.state,
                "location": t.location,
            }
            for t in log.tokens
        ],
        "activations": [{"tick": a.tick, "stage": a.stage, "token": a.token} for a in log.activations],
        "meta_events": [
            {
                "event_id": m.event_id,
                "occurrence_index": m.occurrence_index,
                "start_tick": m.start_tick,
                "end_tick": m.end_tick,
                "tokens": list(m.tokens),
                "notes": list(m.notes),
            }
            for m in log.meta_events
        ],
    }


def log_from_dict(data: dict) -> SimLog:
    if data.get("schema") != LOG_SCHEMA_ID:
        raise ValueError(f"not a simulation log document (schema {data.get('schema')!r})")
    cfg = data["config"]
    return SimLog(
        SimConfig(
            cfg["max_ticks"],
            tuple(Source(s["stage"], tuple(s["ticks"])) for s in cfg["sources"]),
            cfg["seed"],
        ),
        data["model_fingerprint"],
        tuple(Activation(a["tick"], a["stage"], a["token"]) for a in data["activations"]),
        tuple(
            MetaEventRecord(
                m["event_id"], m["occurrence_index"], m["start_tick"], m["end_tick"],
                tuple(m["tokens"]), tuple(m["notes"]),
            )
            for m in data["meta_events"]
        ),
        tuple(
            Token(t["id"], t["label"], t["birth_tick"], t["location"], t["state"], t["origin"], t["end_tick"])
            for t in data["tokens"]
        ),
        tuple(data["notes"]),
        data["halt_tick"],
    )


def to_json(obj: Union[Model, SimLog]) -> str:
    if isinstance(obj, Model):
        doc = model_to_dict(obj)
    elif isinstance(obj, SimLog):
        doc = log_to_dict(obj)
    else:
        raise TypeError(f"cannot export {type(obj).__name__}")
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def from_json(text: str) -> Union[Model, SimLog]:
    data = json.loads(text)
    if data.get("schema") == LOG_SCHEMA_ID:
        return log_from_dict(data)
    return model_from_dict(data)
