"""Pretty-printer for SourceModel; its output reparses to an equal model."""
from __future__ import annotations

from .ast import (
    ActionsBlock,
    ImportDecl,
    MachineBlock,
    MorphismBlock,
    Name,
    ProductDecl,
    ProtocolTransitionDecl,
    RefineDecl,
    SourceModel,
)


def _name(n: Name) -> str:
    if isinstance(n.value, tuple):
        return "(" + ", ".join(_name(x) for x in n.value) + ")"
    return n.value


def _arity(a) -> str:
    return f"{a.name}/{a.arity}" if a.arity else a.name


def _call(name, args) -> str:
    return f"{name}({', '.join(str(a) for a in args)})"


def _actions(b: ActionsBlock) -> list[str]:
    lines = [f"actions {b.name} {{"]
    for d in b.domains:
        lines.append(f"  domain {d.var} in {d.lo}..{d.hi};")
    if b.arg_range is not None:
        lines.append(f"  args {b.arg_range[0]}..{b.arg_range[1]};")
    if b.messages:
        lines.append(f"  messages {', '.join(_arity(m) for m in b.messages)};")
    for a in b.actions:
        params = f"({', '.join(a.params)})" if a.params else ""
        body = "; ".join(str(s) for s in a.body)
        lines.append(f"  action {a.name}{params} {{ {body} }}" if body else f"  action {a.name}{params} {{ }}")
    for s in b.sentences:
        args = f"({', '.join(str(x) for x in s.args)})" if s.args else ""
        msgs = ", ".join(_call(m.name, m.args) for m in s.msgs)
        lines.append(f"  sentence [{s.pre}] {s.action}{args} [{s.post}] / {{{msgs}}};")
    lines.append("}")
    return lines


def _machine(b: MachineBlock) -> list[str]:
    over = f" over {b.over}" if b.over else ""
    lines = [f"{b.kind} {b.name}{over} {{"]
    if b.events:
        lines.append(f"  events {', '.join(_arity(e) for e in b.events)};")
    if b.completions:
        lines.append(f"  completions {', '.join(c.name for c in b.completions)};")
    if b.states:
        lines.append(f"  states {', '.join(_name(s) for s in b.states)};")
    if b.init is not None:
        g = f" [{b.init.guard}]" if b.init.guard is not None else ""
        lines.append(f"  init {_name(b.init.state)}{g};")
    if b.error is not None:
        lines.append(f"  error {_name(b.error)};")
    for t in b.transitions:
        params = f"({', '.join(t.params)})" if t.params else ""
        comps = f", {{{', '.join(t.completions)}}}" if t.completions else ""
        if isinstance(t, ProtocolTransitionDecl):
            pre = f"[{t.pre}] " if t.pre is not None else ""
            post = f" [{t.post}]" if t.post is not None else ""
            msgs = f" / {{{', '.join(_call(m.name, m.args) for m in t.msgs)}}}" if t.msgs else ""
            lines.append(f"  transition {_name(t.source)} -{pre}{t.trigger}{params}{post}{msgs}{comps}"
                         f"-> {_name(t.target)};")
        else:
            guard = f"[{t.guard}]" if t.guard is not None else ""
            action = ""
            if t.action is not None:
                action = "/" + (_call(t.action, t.action_args) if t.action_args else t.action)
            lines.append(f"  transition {_name(t.source)} -{t.trigger}{params}{guard}{action}{comps}"
                         f"-> {_name(t.target)};")
    lines.append("}")
    return lines


def _morphism(b: MorphismBlock) -> list[str]:
    lines = [f"morphism {b.name} : {b.source} -> {b.target} {{"]
    for kind, entries in b.sections:
        body = ", ".join(f"{_name(e.source)} -> {_name(e.target)}" for e in entries)
        lines.append(f"  {kind} {body};")
    lines.append("}")
    return lines


def pretty(model: SourceModel) -> str:
    chunks = []
    for d in model.declarations:
        if isinstance(d, ImportDecl):
            chunks.append([f'import "{d.path}";'])
        elif isinstance(d, ActionsBlock):
            chunks.append(_actions(d))
        elif isinstance(d, MachineBlock):
            chunks.append(_machine(d))
        elif isinstance(d, MorphismBlock):
            chunks.append(_morphism(d))
        elif isinstance(d, ProductDecl):
            chunks.append([f"product {d.name} = {d.left} || {d.right};"])
        elif isinstance(d, RefineDecl):
            chunks.append([f"refine {d.abstract} by {d.concrete} via {d.theta}, {d.sigma};"])
    return "\n\n".join("\n".join(c) for c in chunks) + ("\n" if chunks else "")
