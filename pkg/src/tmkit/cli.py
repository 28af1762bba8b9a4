"""``tm`` command line: validate, simulate, render and export TM models.

Exit codes: 0 ok, 1 validation errors, 2 parse errors, 3 usage error,
4 internal error.  Warnings never make the exit code nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .dsl import parse_with_diagnostics
from .dynamics import check_declared_behavior
from .export import VIEWS, RenderOptions, to_dot, to_json
from .model import Model
from .simulate import ConfigError, SimConfig, check_behavioral_consistency, simulate
from .validate import LENIENT, STRICT, ValidationReport, validate_all

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_PARSE = 2
EXIT_USAGE = 3
EXIT_INTERNAL = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would collide with parse errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _read(path: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    try:
        return p.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise UsageError(f"cannot read {path}: {e}") from None


def _load(path: str) -> Optional[Model]:
    """Parse a model file, echoing diagnostics; None on parse failure."""
    model, diags = parse_with_diagnostics(_read(path), path)
    for d in diags:
        _err(str(d))
    return model


def _full_report(model: Model, mode: str) -> ValidationReport:
    return validate_all(model, mode).merge(check_declared_behavior(model))


def _write(path: str, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot write {path}: {e}") from None


def _report_text(report: ValidationReport) -> str:
    lines = [f"{v.severity}: {v.code} {v.subject}: {v.message}" for v in report.violations]
    lines.append(
        f"{len(report.errors)} error(s), {len(report.warnings)} warning(s), "
        f"{report.checked_rules} check(s)"
    )
    return "\n".join(lines) + "\n"


def cmd_validate(args) -> int:
    model = _load(args.file)
    if model is None:
        return EXIT_PARSE
    report = _full_report(model, LENIENT if args.lenient else STRICT)
    if args.format == "json":
        sys.stdout.write(json.dumps(report.to_dict(), indent=2, sort_keys=False) + "\n")
    else:
        sys.stdout.write(_report_text(report))
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_simulate(args) -> int:
    model = _load(args.file)
    if model is None:
        return EXIT_PARSE
    report = validate_all(model)
    if not report.ok:
        sys.stderr.write(_report_text(report))
        return EXIT_INVALID
    try:
        config = SimConfig.load(args.config) if args.config else SimConfig()
    except FileNotFoundError:
        raise UsageError(f"no such file: {args.config}") from None
    except ConfigError as e:
        raise UsageError(str(e)) from None
    if args.max_ticks is not None:
        if args.max_ticks < 0:
            raise UsageError("--max-ticks must be non-negative")
        config = config.with_max_ticks(args.max_ticks)
    try:
        log = simulate(model, config)
    except ConfigError as e:
        raise UsageError(str(e)) from None
    _write(args.out, log.dumps())
    for note in log.notes:
        _err(note)
    counts = log.occurrences()
    for e in model.events:
        print(f"{e.id}\t{counts.get(e.id, 0)}")
    if args.check_behavior:
        consistency = check_behavioral_consistency(log, model)
        if consistency.violations:
            sys.stderr.write(_report_text(consistency))
            return EXIT_INVALID
    return EXIT_OK


def cmd_render(args) -> int:
    model = _load(args.file)
    if model is None:
        return EXIT_PARSE
    report = validate_all(model, LENIENT if args.lenient else STRICT)
    if not report.ok:
        sys.stderr.write(_report_text(report))
        return EXIT_INVALID
    highlight = frozenset(x for x in (args.highlight or "").split(",") if x)
    dot = to_dot(model, RenderOptions(args.view, highlight, not args.no_annotations))
    if args.out:
        _write(args.out, dot)
    else:
        sys.stdout.write(dot)
    return EXIT_OK


def cmd_export(args) -> int:
    model = _load(args.file)
    if model is None:
        return EXIT_PARSE
    text = to_json(model)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tm", description="Thinging Machine model toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="run every validator over a model file")
    p.add_argument("file")
    p.add_argument("--lenient", action="store_true", help="downgrade intra-thimac adjacency to warnings")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="run the token simulator and write a log")
    p.add_argument("file")
    p.add_argument("--config", help="JSON simulation config (sources, max_ticks, seed)")
    p.add_argument("--out", required=True, help="where to write the log")
    p.add_argument("--max-ticks", type=int, help="override the configured horizon")
    p.add_argument("--check-behavior", action="store_true", help="fail if the log contradicts declared behavior")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("render", help="write Graphviz DOT")
    p.add_argument("file")
    p.add_argument("--view", choices=VIEWS, default="static")
    p.add_argument("--out", help="output path (default: standard output)")
    p.add_argument("--lenient", action="store_true")
    p.add_argument("--highlight", help="comma-separated event ids")
    p.add_argument("--no-annotations", action="store_true")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("export", help="write the model as JSON")
    p.add_argument("file")
    p.add_argument("--out", help="output path (default: standard output)")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except UsageError as e:
        _err(f"tm: {e}")
        return EXIT_USAGE
    except Exception as e:  # last-resort guard so CI sees a distinct code
        _err(f"tm: internal error: {type(e).__name__}: {e}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
