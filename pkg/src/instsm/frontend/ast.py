"""Span-annotated declarations produced by the parser.

Spans are excluded from equality so that a pretty-printed and reparsed
model compares equal to the original.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Union

from .._syntax import Span

NOSPAN = Span(0, 0)


def _span():
    return field(default=NOSPAN, compare=False, repr=False)


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str
    message: str
    span: Span = NOSPAN
    file: str = "<input>"

    def __str__(self) -> str:
        return f"{self.file}:{self.span.line}:{self.span.col}: {self.severity} {self.code}: {self.message}"

    def to_json(self):
        return {"severity": self.severity, "code": self.code, "message": self.message,
                "file": self.file, "line": self.span.line, "col": self.span.col}


@dataclass(frozen=True)
class Name:
    """An identifier or a parenthesised tuple of names (product states)."""

    value: Any  # str or tuple of Name values
    span: Span = _span()

    def plain(self):
        if isinstance(self.value, tuple):
            return tuple(n.plain() for n in self.value)
        return self.value


@dataclass(frozen=True)
class DomainDecl:
    var: str
    lo: int
    hi: int
    span: Span = _span()


@dataclass(frozen=True)
class Arity:
    name: str
    arity: int
    span: Span = _span()


@dataclass(frozen=True)
class ActionDecl:
    name: str
    params: tuple[str, ...]
    body: tuple  # of actions.Assign / actions.Send
    span: Span = _span()


@dataclass(frozen=True)
class MsgPattern:
    name: str
    args: tuple  # IntExpr
    span: Span = _span()


@dataclass(frozen=True)
class SentenceDecl:
    """``sentence [pre] a(args) [post] / {msgs};`` inside an actions block."""

    pre: Any
    action: str
    args: tuple[int, ...]
    post: Any
    msgs: tuple[MsgPattern, ...]
    span: Span = _span()


@dataclass(frozen=True)
class ActionsBlock:
    name: str
    domains: tuple[DomainDecl, ...] = ()
    arg_range: tuple[int, int] | None = None
    messages: tuple[Arity, ...] = ()
    actions: tuple[ActionDecl, ...] = ()
    sentences: tuple[SentenceDecl, ...] = ()
    span: Span = _span()


@dataclass(frozen=True)
class TransitionDecl:
    source: Name
    trigger: str
    params: tuple[str, ...]
    guard: Any  # GuardExpr or None
    action: str | None
    action_args: tuple
    completions: tuple[str, ...]
    target: Name
    span: Span = _span()


@dataclass(frozen=True)
class ProtocolTransitionDecl:
    source: Name
    pre: Any
    trigger: str
    params: tuple[str, ...]
    post: Any
    msgs: tuple[MsgPattern, ...]
    completions: tuple[str, ...]
    target: Name
    span: Span = _span()


@dataclass(frozen=True)
class InitDecl:
    state: Name
    guard: Any = None
    span: Span = _span()


@dataclass(frozen=True)
class MachineBlock:
    kind: str  # "machine" | "protocol"
    name: str
    over: str | None
    events: tuple[Arity, ...] = ()
    completions: tuple[Arity, ...] = ()  # arity unused, kept for spans
    states: tuple[Name, ...] = ()
    init: InitDecl | None = None
    error: Name | None = None
    transitions: tuple[Union[TransitionDecl, ProtocolTransitionDecl], ...] = ()
    span: Span = _span()


@dataclass(frozen=True)
class MapEntry:
    source: Name
    target: Name
    span: Span = _span()


@dataclass(frozen=True)
class MorphismBlock:
    name: str
    source: str
    target: str
    sections: tuple[tuple[str, tuple[MapEntry, ...]], ...] = ()
    span: Span = _span()

    def section(self, kind: str) -> tuple[MapEntry, ...]:
        for k, entries in self.sections:
            if k == kind:
                return entries
        return ()


@dataclass(frozen=True)
class ProductDecl:
    name: str
    left: str
    right: str
    span: Span = _span()


@dataclass(frozen=True)
class RefineDecl:
    abstract: str
    concrete: str
    theta: str
    sigma: str
    span: Span = _span()


@dataclass(frozen=True)
class ImportDecl:
    path: str
    span: Span = _span()


Declaration = Union[ActionsBlock, MachineBlock, MorphismBlock, ProductDecl, RefineDecl, ImportDecl]


@dataclass(frozen=True)
class SourceModel:
    declarations: tuple = ()
    file: str = field(default="<input>", compare=False)

    def of_type(self, kind) -> list:
        return [d for d in self.declarations if isinstance(d, kind)]
