"""Toolkit for Thinging Machine models: parse, validate, derive behavior,
simulate token flow, and export to DOT or JSON."""

from .dsl import TMParseError, parse, parse_file, parse_with_diagnostics, serialize
from .dynamics import check_declared_behavior, derive_precedence, merge_events
from .export import RenderOptions, from_json, to_dot, to_json
from .model import (
    ActionKind,
    BehaviorEdge,
    Direction,
    Event,
    FlowArrow,
    Model,
    ModelBuilder,
    ModelError,
    Stage,
    Thimac,
    TimeAttrs,
    TriggerArrow,
    boundary_of,
    find_stage,
)
from .simulate import (
    SimConfig,
    SimLog,
    Source,
    check_behavioral_consistency,
    dumps_log,
    loads_log,
    replay_window,
    simulate,
)
from .validate import (
    LENIENT,
    STRICT,
    ValidationReport,
    Violation,
    validate_all,
    validate_behavior,
    validate_events,
    validate_static,
)

__version__ = "0.1.0"
