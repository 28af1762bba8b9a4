"""Textual TM models: tokenizer, recovering parser, canonical serializer.

Grammar::

    model      := "model" IDENT "{" item* "}"
    item       := thimac | flow | trigger | event | behavior
    thimac     := "thimac" IDENT STRING? "{" (stageDecl | thimac)* "}"
    stageDecl  := "stage" KIND DIR? ("cost" INT)? ("@" INT)?
    flow       := "flow" PATH "->" PATH STRING? ("@" INT)?
    trigger    := "trigger" PATH "~>" PATH STRING? ("@" INT)?
    event      := "event" IDENT STRING? ("order" INT)? ("duration" INT)?
                  "{" "region" "[" PATH ("," PATH)* "]" "}"
    behavior   := "behavior" IDENT "->" IDENT
    PATH       := IDENT ("." IDENT)* "." KIND ("." DIR)?

``#`` starts a comment that runs to end of line.  The parser keeps going
after a bad item so one pass reports every problem it can.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterator, Optional

from .model import (
    DIRECTION_WORDS,
    KIND_WORDS,
    ActionKind,
    BehaviorDecl,
    Direction,
    EventDecl,
    FlowDecl,
    Model,
    ModelBuilder,
    ModelError,
    StageDecl,
    ThimacDecl,
    TriggerDecl,
)

__all__ = [
    "SourceSpan",
    "ParseDiagnostic",
    "TMParseError",
    "parse",
    "parse_file",
    "parse_with_diagnostics",
    "serialize",
]


@dataclass(frozen=True, order=True)
class SourceSpan:
    file: str
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class ParseDiagnostic:
    severity: str  # "error" | "warning"
    message: str
    span: SourceSpan

    def __str__(self) -> str:
        return f"{self.span}: {self.severity}: {self.message}"


class TMParseError(Exception):
    def __init__(self, diagnostics: list[ParseDiagnostic]):
        self.diagnostics = diagnostics
        errors = [d for d in diagnostics if d.severity == "error"]
        head = str(errors[0]) if errors else "parse failed"
        more = f" (+{len(errors) - 1} more)" if len(errors) > 1 else ""
        super().__init__(head + more)


# --------------------------------------------------------------------------
# Tokens

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<badstring>"[^\n]*)
  | (?P<int>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<arrow>->)
  | (?P<trig>~>)
  | (?P<punct>[{}\[\],.@])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # ident | int | string | punct | arrow | trig | eof
    text: str
    span: SourceSpan

    @property
    def value(self):
        if self.kind == "string":
            return json.loads(self.text)
        if self.kind == "int":
            return int(self.text)
        return self.text


def tokenize(source: str, filename: str = "<string>") -> tuple[list[Token], list[ParseDiagnostic]]:
    tokens: list[Token] = []
    diags: list[ParseDiagnostic] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        span = SourceSpan(filename, line, pos - line_start + 1)
        if m is None:
            diags.append(ParseDiagnostic("error", f"unexpected character {source[pos]!r}", span))
            pos += 1
            continue
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "badstring":
            diags.append(ParseDiagnostic("error", "unterminated string", span))
        elif kind == "string":
            try:
                json.loads(text)
            except ValueError:
                diags.append(ParseDiagnostic("error", "bad escape in string", span))
                text = '""'
            tokens.append(Token(kind, text, span))
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, text, span))
        pos = m.end()
    tokens.append(Token("eof", "", SourceSpan(filename, line, pos - line_start + 1)))
    return tokens, diags


# --------------------------------------------------------------------------
# Parser


class _Syntax(Exception):
    def __init__(self, message: str, span: SourceSpan):
        super().__init__(message)
        self.message = message
        self.span = span


_ITEM_WORDS = {"thimac", "flow", "trigger", "event", "behavior"}


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0
        self.diags: list[ParseDiagnostic] = []
        self.structure: list = []  # thimac/stage directives
        self.rest: list = []  # arrows, events, behavior

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def advance(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("ident", "punct", "arrow", "trig") and t.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise _Syntax(f"expected {text!r}, found {self._describe(self.tok)}", self.tok.span)
        return self.advance()

    def expect_kind(self, kind: str, what: str) -> Token:
        if self.tok.kind != kind:
            raise _Syntax(f"expected {what}, found {self._describe(self.tok)}", self.tok.span)
        return self.advance()

    def optional(self, kind: str) -> Optional[Token]:
        return self.advance() if self.tok.kind == kind else None

    @staticmethod
    def _describe(t: Token) -> str:
        return "end of input" if t.kind == "eof" else repr(t.text)

    def error(self, message: str, span: SourceSpan) -> None:
        self.diags.append(ParseDiagnostic("error", message, span))

    # model := "model" IDENT "{" item* "}"
    def parse_model(self) -> Optional[str]:
        try:
            self.expect("model")
            name = self.expect_kind("ident", "model name").text
            self.expect("{")
        except _Syntax as e:
            self.error(e.message, e.span)
            return None
        while not self.at("}") and self.tok.kind != "eof":
            self.item()
        if self.tok.kind == "eof":
            self.error("expected '}' to close the model", self.tok.span)
        else:
            self.advance()
            if self.tok.kind != "eof":
                self.error(f"unexpected {self._describe(self.tok)} after model", self.tok.span)
        return name

    def item(self) -> None:
        start = self.i
        try:
            word = self.tok.text if self.tok.kind == "ident" else None
            if word == "thimac":
                self.thimac(None)
            elif word == "flow":
                self.arrow(FlowDecl, "->")
            elif word == "trigger":
                self.arrow(TriggerDecl, "~>")
            elif word == "event":
                self.event()
            elif word == "behavior":
                self.behavior()
            else:
                raise _Syntax(
                    f"expected thimac, flow, trigger, event or behavior, found {self._describe(self.tok)}",
                    self.tok.span,
                )
        except _Syntax as e:
            self.error(e.message, e.span)
            self.recover(start)

    def recover(self, start: int) -> None:
        """Skip past the failed item: close any braces it opened, then stop at
        the next top-level item keyword or the model's closing brace."""
        depth = 0
        for t in self.toks[start:self.i]:
            if t.kind == "punct" and t.text == "{":
                depth += 1
            elif t.kind == "punct" and t.text == "}":
                depth = max(depth - 1, 0)
        if self.i == start:
            self.advance()
        while self.tok.kind != "eof":
            if self.at("{"):
                depth += 1
            elif self.at("}"):
                if depth == 0:
                    return
                depth -= 1
                if depth == 0:
                    self.advance()
                    return
            elif depth == 0 and self.tok.kind == "ident" and self.tok.text in _ITEM_WORDS:
                return
            self.advance()

    def thimac(self, parent: Optional[str]) -> None:
        kw = self.expect("thimac")
        name_tok = self.expect_kind("ident", "thimac name")
        if name_tok.text in KIND_WORDS or name_tok.text in DIRECTION_WORDS:
            raise _Syntax(f"{name_tok.text!r} is reserved and cannot name a thimac", name_tok.span)
        display = self.optional("string")
        path = name_tok.text if parent is None else f"{parent}.{name_tok.text}"
        self.structure.append(ThimacDecl(path, display.value if display else None, kw.span))
        self.expect("{")
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise _Syntax(f"unclosed thimac {path!r}", self.tok.span)
            if self.at("stage"):
                self.stage(path)
            elif self.at("thimac"):
                self.thimac(path)
            else:
                raise _Syntax(
                    f"expected stage or thimac, found {self._describe(self.tok)}", self.tok.span
                )
        self.advance()

    def stage(self, owner: str) -> None:
        kw = self.expect("stage")
        kind_tok = self.expect_kind("ident", "stage kind")
        if kind_tok.text not in KIND_WORDS:
            raise _Syntax(f"unknown stage kind {kind_tok.text!r}", kind_tok.span)
        direction = Direction.NONE
        if self.tok.kind == "ident" and self.tok.text in DIRECTION_WORDS:
            direction = Direction(self.advance().text)
        cost = 1
        if self.at("cost"):
            self.advance()
            cost = self.expect_kind("int", "cost value").value
        annotation = self.annotation()
        self.structure.append(
            StageDecl(owner, ActionKind(kind_tok.text), direction, cost, annotation, kw.span)
        )

    def annotation(self) -> Optional[int]:
        if self.at("@"):
            self.advance()
            return self.expect_kind("int", "annotation number").value
        return None

    def path(self) -> str:
        first = self.expect_kind("ident", "stage path")
        parts = [first.text]
        while self.at("."):
            self.advance()
            parts.append(self.expect_kind("ident", "path segment").text)
        last = parts[-1]
        if last in DIRECTION_WORDS:
            ok = len(parts) >= 3 and parts[-2] == "transfer"
        else:
            ok = len(parts) >= 2 and last in KIND_WORDS and last != "transfer"
        if not ok:
            raise _Syntax(f"{'.'.join(parts)!r} is not a stage path", first.span)
        return ".".join(parts)

    def arrow(self, decl, op: str) -> None:
        kw = self.advance()
        src = self.path()
        self.expect(op)
        dst = self.path()
        label = self.optional("string")
        annotation = self.annotation()
        self.rest.append(decl(src, dst, label.value if label else None, annotation, kw.span))

    def event(self) -> None:
        kw = self.advance()
        eid = self.expect_kind("ident", "event id").text
        desc = self.optional("string")
        order = duration = None
        if self.at("order"):
            self.advance()
            order = self.expect_kind("int", "event order").value
        if self.at("duration"):
            self.advance()
            duration = self.expect_kind("int", "duration").value
        self.expect("{")
        self.expect("region")
        self.expect("[")
        region = []
        if not self.at("]"):
            region.append(self.path())
            while self.at(","):
                self.advance()
                region.append(self.path())
        self.expect("]")
        self.expect("}")
        self.rest.append(
            EventDecl(eid, desc.value if desc else "", tuple(region), order, duration, kw.span)
        )

    def behavior(self) -> None:
        kw = self.advance()
        a = self.expect_kind("ident", "event id").text
        self.expect("->")
        b = self.expect_kind("ident", "event id").text
        self.rest.append(BehaviorDecl(a, b, kw.span))


def parse_with_diagnostics(
    source: str, filename: str = "<string>"
) -> tuple[Optional[Model], list[ParseDiagnostic]]:
    """Parse ``source``; the model is None whenever any error was reported."""
    tokens, diags = tokenize(source, filename)
    p = _Parser(tokens)
    name = p.parse_model()
    diags.extend(p.diags)
    if name is None:
        return None, sorted(diags, key=lambda d: d.span)

    builder = ModelBuilder(name)
    # structure first so arrows may name thimacs declared further down
    for d in (*p.structure, *p.rest):
        try:
            builder.apply(d)
        except ModelError as e:
            diags.append(ParseDiagnostic("error", e.message, d.span))
    if any(d.severity == "error" for d in diags):
        return None, sorted(diags, key=lambda d: d.span)
    model = builder.build()
    for t in model.thimacs:
        if not t.stages and not t.children:
            span = next(d.span for d in p.structure if isinstance(d, ThimacDecl) and d.path == t.path)
            diags.append(ParseDiagnostic("warning", f"thimac {t.path!r} is empty", span))
    diags.sort(key=lambda d: d.span)
    return model, diags


def parse(source: str, filename: str = "<string>") -> Model:
    model, diags = parse_with_diagnostics(source, filename)
    if model is None:
        raise TMParseError(diags)
    return model


def parse_file(path) -> Model:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read(), str(path))


# --------------------------------------------------------------------------
# Serializer


def _q(text: str) -> str:
    return json.dumps(text, ensure_ascii=False)


def _lines(model: Model) -> Iterator[str]:
    yield f"model {model.name} {{"

    def thimac(path: str, depth: int) -> Iterator[str]:
        t = model.thimac(path)
        pad = "  " * depth
        head = f"{pad}thimac {t.name}"
        if t.display_name != t.name:
            head += f" {_q(t.display_name)}"
        yield head + " {"
        for sid in t.stages:
            s = model.stage(sid)
            line = f"{pad}  stage {s.kind.value}"
            if s.direction is not Direction.NONE:
                line += f" {s.direction.value}"
            if s.cost_ticks != 1:
                line += f" cost {s.cost_ticks}"
            if s.annotation is not None:
                line += f" @{s.annotation}"
            yield line
        for child in t.children:
            yield from thimac(child, depth + 1)
        yield f"{pad}}}"

    for root in model.roots:
        yield from thimac(root.path, 1)
    for word, op, arrows in (("flow", "->", model.flows), ("trigger", "~>", model.triggers)):
        for a in arrows:
            line = f"  {word} {a.source} {op} {a.target}"
            if a.label is not None:
                line += f" {_q(a.label)}"
            if a.annotation is not None:
                line += f" @{a.annotation}"
            yield line
    for pos, e in enumerate(model.events, 1):
        head = f"  event {e.id}"
        if e.description:
            head += f" {_q(e.description)}"
        if e.time.declared_order is not None and e.time.declared_order != pos:
            head += f" order {e.time.declared_order}"
        if e.time.duration_hint is not None:
            head += f" duration {e.time.duration_hint}"
        yield head + " {"
        yield f"    region [{', '.join(e.region)}]"
        yield "  }"
    for b in model.behavior:
        yield f"  behavior {b.source} -> {b.target}"
    yield "}"


def serialize(model: Model) -> str:
    """Canonical text: thimacs, flows, triggers, events, behavior."""
    return "\n".join(_lines(model)) + "\n"
