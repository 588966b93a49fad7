"""Name resolution and checking: SourceModel -> signatures, structures, sentences, morphisms."""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Any

from .._syntax import Span
from .._util import FrozenMap
from ..actions import (
    SKIP,
    SKIP_PROGRAM,
    ActionMorphism,
    ActionProgram,
    ActionSentence,
    ActionSignature,
    ActionStructure,
    Assign,
    MessageInstance,
    Send,
    interleave_actions,
    materialize_structure,
)
from ..errors import DSLError, InstsmError, WellFormednessError
from ..guards import TRUE, ValueDomain, eval_int, free_vars
from ..machines import (
    FlatMorphism,
    PSMSentence,
    PSMTransition,
    SMMorphism,
    SMSentence,
    SMSignature,
    SMTransition,
    default_gamma,
    validate_morphism,
)
from ..products import interleave_sentences, product_signature
from .ast import (
    ActionsBlock,
    Diagnostic,
    ImportDecl,
    MachineBlock,
    MorphismBlock,
    ProductDecl,
    ProtocolTransitionDecl,
    RefineDecl,
    SourceModel,
)
from .parser import parse


@dataclass
class ActionsArtifact:
    name: str
    sig: ActionSignature
    defs: dict[str, ActionProgram]
    sentences: tuple[ActionSentence, ...] = ()
    _omega: ActionStructure | None = None

    @property
    def omega(self) -> ActionStructure:
        if self._omega is None:
            self._omega = materialize_structure(self.sig, self.defs)
        return self._omega


@dataclass
class MachineArtifact:
    """A behavioural machine, protocol, or product of machines."""

    name: str
    kind: str  # "machine" | "protocol" | "product"
    h: ActionSignature
    sig: SMSignature
    sentence: Any  # SMSentence or PSMSentence
    gamma: frozenset
    actions: ActionsArtifact | None = None
    components: tuple[str, ...] = ()
    action_sentences: tuple[ActionSentence, ...] = ()
    _omega: ActionStructure | None = field(default=None, repr=False)

    @property
    def omega(self) -> ActionStructure:
        return _omega_of(self)


@dataclass
class Elaborated:
    actions: dict[str, ActionsArtifact] = field(default_factory=dict)
    machines: dict[str, MachineArtifact] = field(default_factory=dict)
    morphisms: dict[str, FlatMorphism] = field(default_factory=dict)
    refines: list[RefineDecl] = field(default_factory=list)
    fresh_states: dict[str, frozenset] = field(default_factory=dict)

    def machine(self, name: str) -> MachineArtifact:
        try:
            return self.machines[name]
        except KeyError:
            raise InstsmError(f"no machine named {name!r}") from None


class _Elab:
    def __init__(self, file: str):
        self.file = file
        self.diags: list[Diagnostic] = []
        self.out = Elaborated()
        self.broken: set[str] = set()  # blocks already reported, to avoid cascades

    def err(self, code: str, message: str, span: Span | None, file: str | None = None):
        self.diags.append(Diagnostic("error", code, message, span or Span(0, 0), file or self.file))

    # actions ----------------------------------------------------------

    def actions_block(self, b: ActionsBlock):
        dom = ValueDomain(FrozenMap({d.var: (d.lo, d.hi) for d in b.domains}))
        arities = {a.name: len(a.params) for a in b.actions}
        defs = {a.name: ActionProgram(a.params, a.body) for a in b.actions}
        if SKIP not in defs:
            arities[SKIP] = 0
            defs[SKIP] = SKIP_PROGRAM
        msgs = FrozenMap({m.name: m.arity for m in b.messages})
        sig = ActionSignature(FrozenMap(arities), msgs, dom, b.arg_range or (0, 1))
        ok = True
        for a in b.actions:
            for st in a.body:
                if isinstance(st, Assign) and st.var not in sig.vars:
                    self.err("E010", f"action {a.name}: unknown variable {st.var}", a.span)
                    ok = False
                if isinstance(st, Send):
                    if st.message not in msgs:
                        self.err("E010", f"action {a.name}: unknown message {st.message}", a.span)
                        ok = False
                    elif msgs[st.message] != len(st.args):
                        self.err("E014", f"action {a.name}: {st.message} expects {msgs[st.message]} "
                                 f"arguments, got {len(st.args)}", a.span)
                        ok = False
                exprs = (st.expr,) if isinstance(st, Assign) else st.args
                for e in exprs:
                    unknown = free_vars(e) - sig.vars - set(a.params)
                    if unknown:
                        self.err("E010", f"action {a.name}: unknown names {sorted(unknown)}", a.span)
                        ok = False
            clash = set(a.params) & sig.vars
            if clash:
                self.err("E015", f"action {a.name}: parameters shadow variables {sorted(clash)}", a.span)
                ok = False
        sentences = []
        for s in b.sentences:
            if sig.actions.get(s.action) != len(s.args):
                self.err("E010" if s.action not in sig.actions else "E014",
                         f"sentence refers to unknown action {s.action}/{len(s.args)}", s.span)
                ok = False
                continue
            bad = (free_vars(s.pre) | free_vars(s.post)) - sig.vars
            if bad:
                self.err("E010", f"sentence mentions unknown variables {sorted(bad)}", s.span)
                ok = False
                continue
            try:
                inst = [MessageInstance(m.name, tuple(eval_int(x, {}) for x in m.args)) for m in s.msgs]
            except WellFormednessError as exc:
                self.err("E015", f"sentence message arguments must be constants: {exc}", s.span)
                ok = False
                continue
            for m in inst:
                if msgs.get(m.name) != len(m.args):
                    self.err("E010", f"sentence refers to unknown message {m}", s.span)
                    ok = False
            sentences.append(ActionSentence(s.pre, (s.action, s.args), frozenset(inst), s.post))
        if ok:
            self.out.actions[b.name] = ActionsArtifact(b.name, sig, defs, tuple(sentences))
        else:
            self.broken.add(b.name)

    # machines ---------------------------------------------------------

    def machine_block(self, b: MachineBlock):
        if b.over is not None and b.over not in self.out.actions:
            if b.over in self.broken:
                return
            self.err("E010", f"{b.kind} {b.name}: unknown action signature {b.over}", b.span)
            return
        art = self.out.actions.get(b.over) if b.over else None
        h = art.sig if art else ActionSignature.make()
        states = frozenset(s.plain() for s in b.states)
        sig = SMSignature(FrozenMap({e.name: e.arity for e in b.events}),
                          frozenset(c.name for c in b.completions), states)
        before = len(self.diags)
        for e in b.events:
            if e.name in sig.completions:
                self.err("E011", f"event {e.name} is also declared as a completion event", e.span)
            if e.name in states:
                self.err("E012", f"event {e.name} is also declared as a state", e.span)
            for m, k in h.messages.items():
                if m.rsplit(".", 1)[-1] == e.name and k != e.arity:
                    self.err("E014", f"event {e.name}/{e.arity} clashes with message {m}/{k}", e.span)
        if b.init is None:
            self.err("E010", f"{b.kind} {b.name} has no init declaration", b.span)
            return
        if b.init.state.plain() not in states:
            self.err("E010", f"unknown state {b.init.state.plain()}", b.init.state.span)
        init_guard = b.init.guard or TRUE
        unknown = free_vars(init_guard) - h.vars
        if unknown:
            self.err("E010", f"init guard mentions unknown variables {sorted(unknown)}", b.init.span)
        if b.kind == "protocol":
            if b.error is None:
                self.err("E010", f"protocol {b.name} has no error declaration", b.span)
                return
            if b.error.plain() not in states:
                self.err("E010", f"unknown state {b.error.plain()}", b.error.span)
        transitions = []
        for t in b.transitions:
            for s in (t.source, t.target):
                if s.plain() not in states:
                    self.err("E010", f"unknown state {s.plain()}", s.span)
            scope = h.vars | set(t.params)
            if isinstance(t, ProtocolTransitionDecl):
                transitions.append(self.protocol_transition(b, h, sig, t, scope))
            else:
                transitions.append(self.transition(h, sig, t, scope))
        if len(self.diags) > before:
            return
        if b.kind == "protocol":
            phi = PSMSentence(h, sig, b.init.state.plain(), b.error.plain(), frozenset(transitions))
        else:
            phi = SMSentence(h, sig, b.init.state.plain(), frozenset(transitions))
        gamma = default_gamma(h, init_guard)
        self.out.machines[b.name] = MachineArtifact(
            b.name, b.kind, h, sig, phi, gamma, art, (), art.sentences if art else ())

    def _trigger(self, sig: SMSignature, t, protocol: bool):
        arity = sig.events.get(t.trigger)
        if arity is None and not protocol and t.trigger in sig.completions:
            arity = 0
        if arity is None:
            self.err("E010", f"unknown trigger {t.trigger}", t.span)
        elif arity != len(t.params):
            self.err("E014", f"trigger {t.trigger} takes {arity} parameters, got {len(t.params)}", t.span)

    def transition(self, h, sig, t, scope):
        self._trigger(sig, t, False)
        if set(t.params) & h.vars:
            self.err("E015", f"parameters {sorted(set(t.params) & h.vars)} shadow variables", t.span)
        guard = t.guard or TRUE
        if free_vars(guard) - scope:
            self.err("E010", f"guard mentions unknown names {sorted(free_vars(guard) - scope)}", t.span)
        action = t.action or SKIP
        if action not in h.actions:
            self.err("E010", f"unknown action {action}", t.span)
        elif h.actions[action] != len(t.action_args):
            self.err("E014", f"action {action} takes {h.actions[action]} arguments, "
                     f"got {len(t.action_args)}", t.span)
        for a in t.action_args:
            if free_vars(a) - scope:
                self.err("E010", f"action argument mentions unknown names "
                         f"{sorted(free_vars(a) - scope)}", t.span)
        for f in t.completions:
            if f not in sig.completions:
                self.err("E010", f"unknown completion event {f}", t.span)
        return SMTransition(t.source.plain(), t.trigger, t.params, guard, action, t.action_args,
                            frozenset(t.completions), t.target.plain())

    def protocol_transition(self, b, h, sig, t, scope):
        self._trigger(sig, t, True)
        pre, post = t.pre or TRUE, t.post or TRUE
        for g in (pre, post):
            if free_vars(g) - scope:
                self.err("E010", f"condition mentions unknown names {sorted(free_vars(g) - scope)}", t.span)
        for m in t.msgs:
            if m.name not in h.messages:
                self.err("E010", f"unknown message {m.name}", m.span)
            elif h.messages[m.name] != len(m.args):
                self.err("E014", f"message {m.name} takes {h.messages[m.name]} arguments", m.span)
            for a in m.args:
                if free_vars(a) - scope:
                    self.err("E010", "message argument mentions unknown names", m.span)
        for f in t.completions:
            if f not in sig.completions:
                self.err("E010", f"unknown completion event {f}", t.span)
        if b.error is not None and t.target.plain() == b.error.plain():
            self.err("E015", "protocol transitions may not target the error state", t.target.span)
        return PSMTransition(t.source.plain(), pre, t.trigger, t.params, post,
                             tuple((m.name, m.args) for m in t.msgs), frozenset(t.completions),
                             t.target.plain())

    def product_decl(self, d: ProductDecl):
        parts = []
        for n in (d.left, d.right):
            m = self.out.machines.get(n)
            if m is None:
                self.err("E010", f"unknown machine {n}", d.span)
                return
            if m.kind == "protocol":
                self.err("E015", f"{n} is a protocol; products need behavioural machines", d.span)
                return
            parts.append(m)
        a, b = parts
        try:
            h, sig = product_signature(a.h, a.sig, b.h, b.sig)
            phi = interleave_sentences(a.sentence, b.sentence)
        except InstsmError as exc:
            self.err("E017", f"cannot form product {d.name}: {exc}", d.span)
            return
        gamma = frozenset(w for w in h.domain.valuations()
                          if w.restrict(a.h.vars) in a.gamma and w.restrict(b.h.vars) in b.gamma)
        art = MachineArtifact(d.name, "product", h, sig, phi, gamma, None, (d.left, d.right),
                              a.action_sentences + b.action_sentences)
        art._omega = _LazyProductOmega(a, b)
        self.out.machines[d.name] = art

    # morphisms --------------------------------------------------------

    def morphism_block(self, b: MorphismBlock):
        src, tgt = self.out.machines.get(b.source), self.out.machines.get(b.target)
        for n, m in ((b.source, src), (b.target, tgt)):
            if m is None:
                self.err("E010", f"morphism {b.name}: unknown signature {n}", b.span)
        if src is None or tgt is None:
            return
        result = resolve_morphism(b, src, tgt, allow_fresh_states=src.kind == "protocol")
        for code, message, span in result.problems:
            self.err(code, message, span)
        if not result.problems:
            self.out.morphisms[b.name] = result.morphism
            if result.fresh_states:
                self.out.fresh_states[b.name] = result.fresh_states


class _LazyProductOmega:
    """Placeholder resolved on first access of ``MachineArtifact.omega``."""

    def __init__(self, a: MachineArtifact, b: MachineArtifact):
        self.a, self.b = a, b


def _omega_of(art: MachineArtifact) -> ActionStructure:
    if isinstance(art._omega, _LazyProductOmega):
        lazy = art._omega
        art._omega = interleave_actions(_omega_of(lazy.a), _omega_of(lazy.b))
    if art._omega is None:
        art._omega = art.actions.omega if art.actions else ActionStructure(art.h, frozenset())
    return art._omega


@dataclass
class MorphismResolution:
    morphism: FlatMorphism | None
    problems: list
    fresh_states: frozenset = frozenset()


def resolve_morphism(b: MorphismBlock, src: MachineArtifact, tgt: MachineArtifact,
                     allow_fresh_states: bool = False) -> MorphismResolution:
    """Build a flat morphism; names not listed map to themselves.

    With ``allow_fresh_states`` a state may map to a name the target does
    not declare; such names are returned in ``fresh_states``.
    """
    problems = []

    def table(kind, names):
        given = {}
        for e in b.section(kind):
            s, t = e.source.plain(), e.target.plain()
            if s not in names:
                problems.append(("E010", f"morphism {b.name}: unknown {kind[:-1]} {s}", e.span))
                continue
            given[s] = t
        return {n: given.get(n, n) for n in names}

    eta_maps = {
        "actions": table("actions", src.h.actions),
        "messages": table("messages", src.h.messages),
        "vars": table("vars", src.h.vars),
    }
    events = table("events", src.sig.events)
    comps = table("completions", src.sig.completions)
    states = table("states", src.sig.states)
    for kind, mapping, targets in (("action", eta_maps["actions"], tgt.h.actions),
                                   ("message", eta_maps["messages"], tgt.h.messages),
                                   ("variable", eta_maps["vars"], tgt.h.vars),
                                   ("event", events, tgt.sig.events),
                                   ("completion", comps, tgt.sig.completions)):
        for s, t in sorted(mapping.items()):
            if t not in targets:
                problems.append(("E010", f"morphism {b.name}: {kind} {s} maps to unknown {t}", b.span))
    fresh = frozenset(t for t in states.values() if t not in tgt.sig.states)
    if fresh and not allow_fresh_states:
        for t in sorted(map(str, fresh)):
            problems.append(("E010", f"morphism {b.name}: unknown target state {t}", b.span))
    if problems:
        return MorphismResolution(None, problems)
    target_sig = tgt.sig
    if fresh:
        target_sig = SMSignature(tgt.sig.events, tgt.sig.completions, tgt.sig.states | fresh)
    sigma = SMMorphism(src.sig, target_sig, FrozenMap(events), FrozenMap(comps), FrozenMap(states))
    for p in validate_morphism(sigma, tgt.h):
        code = "E013" if "injective" in p else "E016" if "internal" in p else "E014" if "arity" in p else "E015"
        problems.append((code, f"morphism {b.name}: {p}", b.span))
    try:
        eta = ActionMorphism(src.h, tgt.h, FrozenMap(eta_maps["actions"]),
                             FrozenMap(eta_maps["messages"]), FrozenMap(eta_maps["vars"]))
    except WellFormednessError as exc:
        code = "E014" if ("arity" in str(exc) or "range" in str(exc)) else "E015"
        problems.append((code, f"morphism {b.name}: {exc}", b.span))
        return MorphismResolution(None, problems)
    if problems:
        return MorphismResolution(None, problems)
    return MorphismResolution(FlatMorphism(eta, sigma), [], fresh)


def elaborate(model: SourceModel, base_dir: str | None = None, _seen: set | None = None) -> Elaborated:
    """Resolve names and check constraints; raises DSLError with all diagnostics."""
    elab = _Elab(model.file)
    decls = _expand_imports(model, base_dir, elab, _seen if _seen is not None else set())
    for file, d in decls:
        elab.file = file
        if isinstance(d, ActionsBlock):
            elab.actions_block(d)
    for file, d in decls:
        elab.file = file
        if isinstance(d, MachineBlock):
            elab.machine_block(d)
    for file, d in decls:
        elab.file = file
        if isinstance(d, ProductDecl):
            elab.product_decl(d)
    for file, d in decls:
        elab.file = file
        if isinstance(d, MorphismBlock):
            elab.morphism_block(d)
        elif isinstance(d, RefineDecl):
            for n in (d.abstract, d.concrete):
                if n not in elab.out.machines:
                    elab.err("E010", f"refine: unknown machine {n}", d.span)
            for n in (d.theta, d.sigma):
                if n not in elab.out.morphisms:
                    elab.err("E010", f"refine: unknown morphism {n}", d.span)
            elab.out.refines.append(d)
    if elab.diags:
        raise DSLError(elab.diags)
    return elab.out


def _expand_imports(model: SourceModel, base_dir, elab: _Elab, seen: set) -> list:
    out = []
    base_dir = base_dir if base_dir is not None else (
        os.path.dirname(model.file) if model.file and not model.file.startswith("<") else ".")
    for d in model.declarations:
        if isinstance(d, ImportDecl):
            path = os.path.normpath(os.path.join(base_dir, d.path))
            if path in seen:
                continue
            seen.add(path)
            try:
                with open(path, encoding="utf-8") as fh:
                    sub = parse(fh.read(), path)
            except OSError as exc:
                elab.err("E018", f"cannot import {d.path}: {exc.strerror}", d.span, model.file)
                continue
            except DSLError as exc:
                elab.diags.extend(exc.diagnostics)
                continue
            out.extend(_expand_imports(sub, os.path.dirname(path), elab, seen))
        else:
            out.append((model.file, d))
    return out


def load(path: str, extra: list[str] | None = None) -> Elaborated:
    """Parse and elaborate a file, optionally together with additional files (maps)."""
    with open(path, encoding="utf-8") as fh:
        model = parse(fh.read(), path)
    decls = list(model.declarations)
    for p in extra or []:
        decls.append(ImportDecl(os.path.relpath(p, os.path.dirname(path) or ".")))
    return elaborate(SourceModel(tuple(decls), path))
