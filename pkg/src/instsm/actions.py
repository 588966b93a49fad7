"""The institution of actions.

A signature ``H = (A, M, V)`` names actions, messages and variables.  A
structure ``Omega`` is a finite relation of transitions
``(omega, a, msgs, omega')`` materialized over finite variable domains.
Actions and messages may carry integer arguments; the signature elements
are the names and an instance is a name together with an argument tuple.
"""
from __future__ import annotations

import itertools
from collections import defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Union

from ._util import FrozenMap, canonical, env_cap, sort_key
from .errors import (
    AmalgamationError,
    BindingError,
    CapacityError,
    RangeError,
    WellFormednessError,
)
from .guards import (
    EMPTY_DOMAIN,
    GuardExpr,
    GuardMorphism,
    IntExpr,
    Valuation,
    ValueDomain,
    check_guard,
    eval_guard,
    eval_int,
    free_vars,
    translate_guard,
)

DEFAULT_ARG_RANGE = (0, 1)
SKIP = "skip"


def op_name(name: str) -> str:
    """Operation part of a possibly port-qualified name: ``bank.verify`` -> ``verify``."""
    return name.rsplit(".", 1)[-1]


def _fmt_call(name: str, args: tuple) -> str:
    return f"{name}({','.join(str(a) for a in args)})"


class MessageInstance(NamedTuple):
    name: str
    args: tuple[int, ...] = ()

    def __str__(self) -> str:
        return _fmt_call(self.name, self.args)

    def to_json(self) -> str:
        return str(self)


class ActionInstance(NamedTuple):
    name: str
    args: tuple[int, ...] = ()

    def __str__(self) -> str:
        return _fmt_call(self.name, self.args)

    def to_json(self) -> str:
        return str(self)


def msg(name: str, *args: int) -> MessageInstance:
    return MessageInstance(name, tuple(args))


def act(name: str, *args: int) -> ActionInstance:
    return ActionInstance(name, tuple(args))


def parse_instance(text: str) -> tuple[str, tuple[int, ...]]:
    """Parse ``name(1,2)`` or a bare ``name``."""
    text = text.strip()
    if "(" not in text:
        return text, ()
    name, rest = text.split("(", 1)
    inner = rest.rstrip(")").strip()
    args = tuple(int(a) for a in inner.split(",")) if inner else ()
    return name.strip(), args


# ---------------------------------------------------------------- signatures


@dataclass(frozen=True)
class ActionSignature:
    """``H = (A_H, M_H, V_H)`` with arities and finite domains.

    ``arg_range`` is the inclusive range shared by action and message
    arguments.
    """

    actions: FrozenMap[str, int]
    messages: FrozenMap[str, int]
    domain: ValueDomain = EMPTY_DOMAIN
    arg_range: tuple[int, int] = DEFAULT_ARG_RANGE

    def __post_init__(self):
        object.__setattr__(self, "actions", FrozenMap(self.actions))
        object.__setattr__(self, "messages", FrozenMap(self.messages))
        object.__setattr__(self, "arg_range", tuple(self.arg_range))
        for kind, table in (("action", self.actions), ("message", self.messages)):
            for name, arity in table.items():
                if not name or not isinstance(arity, int) or arity < 0:
                    raise WellFormednessError(f"bad {kind} declaration {name!r}/{arity!r}")
        lo, hi = self.arg_range
        if lo > hi:
            raise WellFormednessError(f"empty argument range {lo}..{hi}")

    @classmethod
    def make(cls, actions=(), messages=(), domain: ValueDomain | Mapping | None = None,
             arg_range=DEFAULT_ARG_RANGE) -> "ActionSignature":
        """Convenience constructor; bare names get arity 0."""
        def table(spec):
            if isinstance(spec, Mapping):
                return FrozenMap(spec)
            return FrozenMap({n: 0 for n in spec})

        if domain is None:
            domain = EMPTY_DOMAIN
        elif not isinstance(domain, ValueDomain):
            domain = ValueDomain(FrozenMap(domain))
        return cls(table(actions), table(messages), domain, tuple(arg_range))

    @property
    def vars(self) -> frozenset[str]:
        return self.domain.vars

    def action_instances(self) -> list[ActionInstance]:
        lo, hi = self.arg_range
        out = []
        for name in sorted(self.actions):
            for args in itertools.product(range(lo, hi + 1), repeat=self.actions[name]):
                out.append(ActionInstance(name, tuple(args)))
        return out

    def message_instances(self, names: Iterable[str] | None = None) -> list[MessageInstance]:
        lo, hi = self.arg_range
        names = sorted(self.messages) if names is None else sorted(names)
        out = []
        for name in names:
            for args in itertools.product(range(lo, hi + 1), repeat=self.messages[name]):
                out.append(MessageInstance(name, tuple(args)))
        return out

    def in_arg_range(self, args: Iterable[int]) -> bool:
        lo, hi = self.arg_range
        return all(lo <= a <= hi for a in args)

    def union(self, other: "ActionSignature") -> "ActionSignature":
        """Component-wise union; shared names must agree on arity and range."""
        return ActionSignature(
            _merge_arities(self.actions, other.actions, "action"),
            _merge_arities(self.messages, other.messages, "message"),
            self.domain.union(other.domain),
            (min(self.arg_range[0], other.arg_range[0]), max(self.arg_range[1], other.arg_range[1])),
        )

    def intersection(self, other: "ActionSignature") -> "ActionSignature":
        shared_vars = self.vars & other.vars
        dom = self.domain.restrict(shared_vars)
        if dom != other.domain.restrict(shared_vars):
            raise WellFormednessError("shared variables have different ranges")
        return ActionSignature(
            FrozenMap({a: n for a, n in self.actions.items() if other.actions.get(a) == n}),
            FrozenMap({m: n for m, n in self.messages.items() if other.messages.get(m) == n}),
            dom,
            self.arg_range,
        )

    def is_subsignature(self, other: "ActionSignature") -> bool:
        return (all(other.actions.get(a) == n for a, n in self.actions.items())
                and all(other.messages.get(m) == n for m, n in self.messages.items())
                and all(other.domain.ranges.get(v) == r for v, r in self.domain.ranges.items()))

    def to_json(self):
        return {
            "actions": {a: n for a, n in sorted(self.actions.items())},
            "messages": {m: n for m, n in sorted(self.messages.items())},
            "vars": self.domain.to_json(),
            "arg_range": list(self.arg_range),
        }


def _merge_arities(a: Mapping[str, int], b: Mapping[str, int], kind: str) -> FrozenMap:
    merged = dict(a)
    for name, n in b.items():
        if name in merged and merged[name] != n:
            raise WellFormednessError(f"{kind} {name} has arities {merged[name]} and {n}")
        merged[name] = n
    return FrozenMap(merged)


@dataclass(frozen=True)
class ActionMorphism:
    """``eta = (eta_A, eta_M, eta_V)``: total, arity and domain preserving."""

    source: ActionSignature
    target: ActionSignature
    on_actions: FrozenMap[str, str]
    on_messages: FrozenMap[str, str]
    on_vars: FrozenMap[str, str]

    def __post_init__(self):
        for attr in ("on_actions", "on_messages", "on_vars"):
            object.__setattr__(self, attr, FrozenMap(getattr(self, attr)))
        s, t = self.source, self.target
        _check_total(self.on_actions, s.actions, t.actions, "action", arity=True)
        _check_total(self.on_messages, s.messages, t.messages, "message", arity=True)
        _check_total(self.on_vars, s.domain.ranges, t.domain.ranges, "variable", arity=True)
        parametrised = any(n > 0 for n in (*s.actions.values(), *s.messages.values()))
        if parametrised and s.arg_range != t.arg_range:
            raise WellFormednessError(
                f"argument ranges differ: {s.arg_range} vs {t.arg_range}")

    @classmethod
    def identity(cls, sig: ActionSignature) -> "ActionMorphism":
        return cls.inclusion(sig, sig)

    @classmethod
    def inclusion(cls, sub: ActionSignature, sup: ActionSignature) -> "ActionMorphism":
        return cls(sub, sup,
                   FrozenMap({a: a for a in sub.actions}),
                   FrozenMap({m: m for m in sub.messages}),
                   FrozenMap({v: v for v in sub.vars}))

    @classmethod
    def from_partial(cls, source: ActionSignature, target: ActionSignature,
                     actions: Mapping[str, str] | None = None,
                     messages: Mapping[str, str] | None = None,
                     vars: Mapping[str, str] | None = None) -> "ActionMorphism":
        """Names missing from the given maps are mapped to themselves."""
        def fill(names, given):
            given = dict(given or {})
            return FrozenMap({n: given.get(n, n) for n in names})

        return cls(source, target, fill(source.actions, actions),
                   fill(source.messages, messages), fill(source.vars, vars))

    @property
    def on_guards(self) -> GuardMorphism:
        return GuardMorphism(self.source.domain.signature, self.target.domain.signature, self.on_vars)

    def then(self, other: "ActionMorphism") -> "ActionMorphism":
        """Composition ``other ∘ self``."""
        return ActionMorphism(
            self.source, other.target,
            FrozenMap({a: other.on_actions[b] for a, b in self.on_actions.items()}),
            FrozenMap({m: other.on_messages[n] for m, n in self.on_messages.items()}),
            FrozenMap({v: other.on_vars[w] for v, w in self.on_vars.items()}),
        )

    def messages_injective(self) -> bool:
        return len(set(self.on_messages.values())) == len(self.on_messages)

    def is_injective(self) -> bool:
        return all(len(set(m.values())) == len(m)
                   for m in (self.on_actions, self.on_messages, self.on_vars))

    def map_messages(self, msgs: Iterable[MessageInstance]) -> frozenset[MessageInstance]:
        return frozenset(MessageInstance(self.on_messages[m.name], m.args) for m in msgs)

    def inv_messages(self, msgs: Iterable[MessageInstance]) -> frozenset[MessageInstance]:
        """``eta_M^-1(msgs)``: all source instances whose image is in ``msgs``."""
        pre = defaultdict(list)
        for s, t in self.on_messages.items():
            pre[t].append(s)
        return frozenset(MessageInstance(s, m.args) for m in msgs for s in pre.get(m.name, ()))

    def map_action(self, a: ActionInstance) -> ActionInstance:
        return ActionInstance(self.on_actions[a.name], a.args)

    def reduct_valuation(self, omega: Mapping[str, int]) -> Valuation:
        return Valuation({x: omega[y] for x, y in self.on_vars.items()})

    def to_json(self):
        return {
            "actions": dict(sorted(self.on_actions.items())),
            "messages": dict(sorted(self.on_messages.items())),
            "vars": dict(sorted(self.on_vars.items())),
        }


def _check_total(mapping, src, tgt, kind, arity):
    missing = set(src) - set(mapping)
    if missing:
        raise WellFormednessError(f"{kind} map undefined on {sorted(missing)}")
    extra = set(mapping) - set(src)
    if extra:
        raise WellFormednessError(f"{kind} map has unknown names {sorted(extra)}")
    for a, b in mapping.items():
        if b not in tgt:
            raise WellFormednessError(f"{kind} {a} mapped to undeclared {b}")
        if arity and src[a] != tgt[b]:
            what = "range" if kind == "variable" else "arity"
            raise WellFormednessError(f"{kind} {a} -> {b} changes {what}: {src[a]} vs {tgt[b]}")


# ------------------------------------------------------------------ programs


@dataclass(frozen=True)
class Assign:
    var: str
    expr: IntExpr

    def __str__(self) -> str:
        return f"{self.var} := {self.expr}"


@dataclass(frozen=True)
class Send:
    message: str
    args: tuple[IntExpr, ...] = ()

    def __str__(self) -> str:
        return f"send {self.message}({', '.join(str(a) for a in self.args)})"


Statement = Union[Assign, Send]


@dataclass(frozen=True)
class ActionProgram:
    """Parameter names plus a straight-line sequence of statements."""

    params: tuple[str, ...] = ()
    body: tuple[Statement, ...] = ()

    def __str__(self) -> str:
        return "; ".join(str(s) for s in self.body)

    def check(self, sig: ActionSignature, name: str = "?") -> None:
        if len(set(self.params)) != len(self.params):
            raise WellFormednessError(f"action {name}: duplicate parameter")
        clash = set(self.params) & sig.vars
        if clash:
            raise WellFormednessError(f"action {name}: parameters shadow variables {sorted(clash)}")
        scope = sig.vars | set(self.params)
        for st in self.body:
            exprs: tuple = ()
            if isinstance(st, Assign):
                if st.var not in sig.vars:
                    raise WellFormednessError(f"action {name}: assignment to undeclared {st.var}")
                exprs = (st.expr,)
            elif isinstance(st, Send):
                if st.message not in sig.messages:
                    raise WellFormednessError(f"action {name}: undeclared message {st.message}")
                if sig.messages[st.message] != len(st.args):
                    raise WellFormednessError(
                        f"action {name}: {st.message} expects {sig.messages[st.message]} arguments")
                exprs = st.args
            for e in exprs:
                unknown = free_vars(e) - scope
                if unknown:
                    raise WellFormednessError(f"action {name}: unknown names {sorted(unknown)}")


SKIP_PROGRAM = ActionProgram()


def exec_program(prog: ActionProgram, omega: Valuation, binding: Mapping[str, int] | None = None,
                 sig: ActionSignature | None = None) -> tuple[frozenset[MessageInstance], Valuation]:
    """Run ``prog`` from ``omega``; returns the sent messages and the new valuation.

    With ``sig`` given, assignments outside a variable's range and message
    arguments outside ``sig.arg_range`` raise RangeError.
    """
    binding = dict(binding or {})
    missing = [p for p in prog.params if p not in binding]
    if missing:
        raise BindingError(f"unbound parameters {missing}")
    state = dict(omega)
    sent = set()
    for st in prog.body:
        env = {**state, **binding}
        if isinstance(st, Assign):
            value = _eval(st.expr, env)
            if sig is not None and not sig.domain.in_range(st.var, value):
                raise RangeError(f"{st.var} := {value} is outside {sig.domain.ranges[st.var]}")
            state[st.var] = value
        else:
            args = tuple(_eval(a, env) for a in st.args)
            if sig is not None and not sig.in_arg_range(args):
                raise RangeError(f"{st.message}{args} has arguments outside {sig.arg_range}")
            sent.add(MessageInstance(st.message, args))
    return frozenset(sent), Valuation(state)


def _eval(e: IntExpr, env: Mapping[str, int]) -> int:
    try:
        return eval_int(e, env)
    except WellFormednessError as exc:
        raise BindingError(str(exc)) from None


# ---------------------------------------------------------------- structures


class ActionTransition(NamedTuple):
    omega: Valuation
    action: ActionInstance
    msgs: frozenset
    omega_prime: Valuation

    def to_json(self):
        return {
            "omega": self.omega.to_json(),
            "action": str(self.action),
            "msgs": sorted(str(m) for m in self.msgs),
            "omega_prime": self.omega_prime.to_json(),
        }


@dataclass(frozen=True)
class ActionStructure:
    sig: ActionSignature
    transitions: frozenset[ActionTransition] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "transitions", frozenset(
            ActionTransition(Valuation(t[0]), ActionInstance(*t[1]), frozenset(t[2]), Valuation(t[3]))
            for t in self.transitions))

    def validate(self) -> None:
        for t in self.transitions:
            if not (self.sig.domain.contains(t.omega) and self.sig.domain.contains(t.omega_prime)):
                raise WellFormednessError(f"valuation outside the domain in {t}")
            if self.sig.actions.get(t.action.name) != len(t.action.args):
                raise WellFormednessError(f"unknown action instance {t.action}")
            for m in t.msgs:
                if self.sig.messages.get(m.name) != len(m.args):
                    raise WellFormednessError(f"unknown message instance {m}")

    def __len__(self) -> int:
        return len(self.transitions)

    def sorted_transitions(self) -> list[ActionTransition]:
        return canonical(self.transitions)

    @cached_property
    def _index(self):
        table: dict = defaultdict(list)
        for t in self.transitions:
            table[(t.omega, t.action)].append(t)
        return dict(table)

    def index(self) -> dict[tuple[Valuation, ActionInstance], list[ActionTransition]]:
        """Transitions grouped by ``(omega, action)``."""
        return self._index

    def outcomes(self, omega: Valuation, action: ActionInstance) -> list[ActionTransition]:
        return self._index.get((omega, action), [])

    def to_json(self):
        return [t.to_json() for t in self.sorted_transitions()]


def materialize_structure(sig: ActionSignature, defs: Mapping[str, ActionProgram],
                          cap: int | None = None) -> ActionStructure:
    """Enumerate every transition generated by the programs in ``defs``.

    A run that leaves a variable's range (or sends an argument outside the
    argument range) contributes no transition.
    """
    cap = env_cap() if cap is None else cap
    missing = set(sig.actions) - set(defs)
    if missing:
        raise WellFormednessError(f"no program for actions {sorted(missing)}")
    for name in sig.actions:
        prog = defs[name]
        if len(prog.params) != sig.actions[name]:
            raise WellFormednessError(f"action {name} declares {sig.actions[name]} parameters")
        prog.check(sig, name)
    instances = sig.action_instances()
    valuations = sig.domain.valuations(cap)
    if len(instances) * len(valuations) > cap:
        raise CapacityError(f"{len(instances) * len(valuations)} action runs exceed cap {cap}")
    out = set()
    for inst in instances:
        prog = defs[inst.name]
        binding = dict(zip(prog.params, inst.args))
        for omega in valuations:
            try:
                sent, omega2 = exec_program(prog, omega, binding, sig)
            except RangeError:
                continue
            out.add(ActionTransition(omega, inst, sent, omega2))
    return ActionStructure(sig, frozenset(out))


def reduct_structure(eta: ActionMorphism, omega_prime: ActionStructure) -> ActionStructure:
    """``Omega'|eta``: reduce valuations, take action preimages, ``eta_M^-1`` on messages."""
    pre_actions = defaultdict(list)
    for a, b in eta.on_actions.items():
        pre_actions[b].append(a)
    out = set()
    for t in omega_prime.transitions:
        sources = pre_actions.get(t.action.name)
        if not sources:
            continue
        w1 = eta.reduct_valuation(t.omega)
        w2 = eta.reduct_valuation(t.omega_prime)
        msgs = eta.inv_messages(t.msgs)
        for a in sources:
            out.add(ActionTransition(w1, ActionInstance(a, t.action.args), msgs, w2))
    return ActionStructure(eta.source, frozenset(out))


def _extensions(eta: ActionMorphism, omega: Valuation) -> list[Valuation]:
    """Target valuations whose reduct along eta is ``omega``."""
    fixed: dict[str, int] = {}
    for x, y in eta.on_vars.items():
        if y in fixed and fixed[y] != omega[x]:
            return []
        fixed[y] = omega[x]
    free = sorted(eta.target.vars - set(fixed))
    axes = [range(eta.target.domain.ranges[v][0], eta.target.domain.ranges[v][1] + 1) for v in free]
    return [Valuation({**fixed, **dict(zip(free, combo))}) for combo in itertools.product(*axes)]


def translate_structure(eta: ActionMorphism, omega: ActionStructure, extra_msgs: int = 3,
                        cap: int | None = None) -> ActionStructure:
    """``eta(Omega)``: target transitions whose reduct along eta is in Omega.

    Target message sets are the image of the source set together with up to
    ``extra_msgs`` instances of messages outside the image of ``eta_M``.
    """
    cap = env_cap() if cap is None else cap
    unmapped = set(eta.target.messages) - set(eta.on_messages.values())
    pool = eta.target.message_instances(unmapped)
    extras = [frozenset(c) for k in range(min(extra_msgs, len(pool)) + 1)
              for c in itertools.combinations(pool, k)]
    out = set()
    for t in omega.transitions:
        image = eta.map_messages(t.msgs)
        if eta.inv_messages(image) != t.msgs:
            continue  # no target set has exactly this preimage
        starts = _extensions(eta, t.omega)
        ends = _extensions(eta, t.omega_prime)
        if len(out) + len(starts) * len(ends) * len(extras) > cap:
            raise CapacityError(f"translation exceeds cap {cap}")
        a = eta.map_action(t.action)
        for w1 in starts:
            for w2 in ends:
                for x in extras:
                    out.add(ActionTransition(w1, a, image | x, w2))
    return ActionStructure(eta.target, frozenset(out))


# ----------------------------------------------------------------- sentences


@dataclass(frozen=True)
class ActionSentence:
    """``pre -> [action] msgs |> post``."""

    pre: GuardExpr
    action: ActionInstance
    msgs: frozenset[MessageInstance]
    post: GuardExpr

    def __post_init__(self):
        object.__setattr__(self, "action", ActionInstance(*self.action))
        object.__setattr__(self, "msgs", frozenset(MessageInstance(*m) for m in self.msgs))

    def check(self, sig: ActionSignature) -> None:
        check_guard(self.pre, sig.vars)
        check_guard(self.post, sig.vars)
        if sig.actions.get(self.action.name) != len(self.action.args):
            raise WellFormednessError(f"unknown action {self.action}")
        for m in self.msgs:
            if sig.messages.get(m.name) != len(m.args):
                raise WellFormednessError(f"unknown message {m}")

    def __str__(self) -> str:
        msgs = ", ".join(sorted(str(m) for m in self.msgs))
        return f"{self.pre} -> [{self.action}]{{{msgs}}} |> {self.post}"

    def to_json(self):
        return str(self)


def action_sat(omega: ActionStructure, phi: ActionSentence) -> bool:
    for t in omega.transitions:
        if t.action != phi.action or not eval_guard(phi.pre, t.omega):
            continue
        if not eval_guard(phi.post, t.omega_prime) or not phi.msgs <= t.msgs:
            return False
    return True


def translate_sentence(eta: ActionMorphism, phi: ActionSentence) -> ActionSentence:
    v = eta.on_guards
    return ActionSentence(translate_guard(v, phi.pre), eta.map_action(phi.action),
                          eta.map_messages(phi.msgs), translate_guard(v, phi.post))


# --------------------------------------------------------------- determinism


class DetVerdict(NamedTuple):
    """Outcome of a determinism check; ``witness`` is set iff ``holds`` is false."""

    kind: str
    holds: bool
    witness: tuple | None = None

    def __bool__(self) -> bool:
        return self.holds

    def to_json(self):
        from ._util import jsonable

        return {"kind": self.kind, "holds": self.holds,
                "witness": None if self.witness is None else jsonable(self.witness)}


def is_deterministic(omega: ActionStructure) -> DetVerdict:
    table = omega.index()
    for key in sorted(table, key=sort_key):
        outcomes = table[key]
        if len(outcomes) > 1:
            pair = tuple(canonical(outcomes)[:2])
            return DetVerdict("action", False, pair)
    return DetVerdict("action", True, None)


def compatible(omega1: ActionStructure, omega2: ActionStructure) -> bool:
    """Whether both structures reduce to the same structure over ``H1 ∩ H2``."""
    shared = omega1.sig.intersection(omega2.sig)
    r1 = reduct_structure(ActionMorphism.inclusion(shared, omega1.sig), omega1)
    r2 = reduct_structure(ActionMorphism.inclusion(shared, omega2.sig), omega2)
    return r1.transitions == r2.transitions


def _frames(dom: ValueDomain, names: Iterable[str]) -> list[Valuation]:
    return dom.restrict(names).valuations()


def _side_steps(omega_i: ActionStructure, dom: ValueDomain, other_vars, actions=None) -> set:
    """Transitions of one side, with the other side's private variables unchanged."""
    frames = _frames(dom, set(other_vars) - omega_i.sig.vars)
    out = set()
    for t in omega_i.transitions:
        if actions is not None and t.action.name not in actions:
            continue
        for rho in frames:
            out.add(ActionTransition(t.omega.update(rho), t.action, t.msgs, t.omega_prime.update(rho)))
    return out


def interleave_actions(omega1: ActionStructure, omega2: ActionStructure,
                       cap: int | None = None) -> ActionStructure:
    """``Omega1 || Omega2``: either side fires, the other's private variables are framed."""
    sig = omega1.sig.union(omega2.sig)
    _check_size(sig, omega1, omega2, cap)
    out = _side_steps(omega1, sig.domain, omega2.sig.vars)
    out |= _side_steps(omega2, sig.domain, omega1.sig.vars)
    return ActionStructure(sig, frozenset(out))


def interleave_actions_shared(omega1: ActionStructure, omega2: ActionStructure,
                              cap: int | None = None) -> ActionStructure:
    """``Omega1 ||' Omega2``: shared actions fire jointly and their messages are united."""
    sig = omega1.sig.union(omega2.sig)
    _check_size(sig, omega1, omega2, cap)
    shared_actions = set(omega1.sig.actions) & set(omega2.sig.actions)
    out = _side_steps(omega1, sig.domain, omega2.sig.vars, set(omega1.sig.actions) - shared_actions)
    out |= _side_steps(omega2, sig.domain, omega1.sig.vars, set(omega2.sig.actions) - shared_actions)
    shared_vars = omega1.sig.vars & omega2.sig.vars
    right = defaultdict(list)
    for t2 in omega2.transitions:
        if t2.action.name in shared_actions:
            key = (t2.action, t2.omega.restrict(shared_vars), t2.omega_prime.restrict(shared_vars))
            right[key].append(t2)
    for t1 in omega1.transitions:
        if t1.action.name not in shared_actions:
            continue
        key = (t1.action, t1.omega.restrict(shared_vars), t1.omega_prime.restrict(shared_vars))
        for t2 in right.get(key, ()):
            out.add(ActionTransition(t1.omega.update(t2.omega), t1.action, t1.msgs | t2.msgs,
                                     t1.omega_prime.update(t2.omega_prime)))
    return ActionStructure(sig, frozenset(out))


def _check_size(sig, omega1, omega2, cap):
    cap = env_cap() if cap is None else cap
    bound = (len(omega1) * sig.domain.restrict(sig.vars - omega1.sig.vars).size()
             + len(omega2) * sig.domain.restrict(sig.vars - omega2.sig.vars).size())
    if bound > cap:
        raise CapacityError(f"product would have up to {bound} transitions, cap is {cap}")


# ------------------------------------------------------ pushout / amalgamation


class _DisjointSet:
    def __init__(self):
        self.parent: dict = {}

    def add(self, x):
        self.parent.setdefault(x, x)

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)

    def classes(self) -> list[list]:
        groups = defaultdict(list)
        for x in self.parent:
            groups[self.find(x)].append(x)
        return [sorted(g) for _, g in sorted(groups.items())]


def _pushout_names(apex: Iterable[str], map1: Mapping[str, str], map2: Mapping[str, str],
                   left: Iterable[str], right: Iterable[str]):
    """Set pushout of ``left <- apex -> right``; returns the names and both injections."""
    ds = _DisjointSet()
    for x in left:
        ds.add((1, x))
    for y in right:
        ds.add((2, y))
    for h in apex:
        ds.union((1, map1[h]), (2, map2[h]))
    classes = ds.classes()
    wanted = [min(name for _, name in cls) for cls in classes]
    counts = defaultdict(int)
    for w in wanted:
        counts[w] += 1
    names, inj1, inj2 = [], {}, {}
    for cls, w in zip(classes, wanted):
        if counts[w] > 1:
            side = min(s for s, _ in cls)
            w = f"{w}_{side}"
        names.append(w)
        for side, x in cls:
            (inj1 if side == 1 else inj2)[x] = w
    if len(set(names)) != len(names):
        raise WellFormednessError("could not assign distinct pushout names")
    return names, inj1, inj2


def pushout_action_sigs(eta1: ActionMorphism, eta2: ActionMorphism):
    """Component-wise pushout of ``H1 <- H -> H2``; returns ``(H_R, theta1, theta2)``."""
    if eta1.source != eta2.source:
        raise WellFormednessError("span legs must share their source")
    h, h1, h2 = eta1.source, eta1.target, eta2.target
    if h1.arg_range != h2.arg_range:
        raise WellFormednessError("argument ranges differ")
    _, a1, a2 = _pushout_names(h.actions, eta1.on_actions, eta2.on_actions, h1.actions, h2.actions)
    _, m1, m2 = _pushout_names(h.messages, eta1.on_messages, eta2.on_messages, h1.messages, h2.messages)
    _, v1, v2 = _pushout_names(h.vars, eta1.on_vars, eta2.on_vars, h1.vars, h2.vars)

    def collect(inj1, inj2, t1, t2, what):
        out = {}
        for inj, table in ((inj1, t1), (inj2, t2)):
            for x, y in inj.items():
                if y in out and out[y] != table[x]:
                    raise WellFormednessError(f"{what} {y} glues incompatible declarations")
                out[y] = table[x]
        return FrozenMap(out)

    hr = ActionSignature(
        collect(a1, a2, h1.actions, h2.actions, "action"),
        collect(m1, m2, h1.messages, h2.messages, "message"),
        ValueDomain(collect(v1, v2, h1.domain.ranges, h2.domain.ranges, "variable")),
        h1.arg_range,
    )
    theta1 = ActionMorphism(h1, hr, FrozenMap(a1), FrozenMap(m1), FrozenMap(v1))
    theta2 = ActionMorphism(h2, hr, FrozenMap(a2), FrozenMap(m2), FrozenMap(v2))
    return hr, theta1, theta2


def image_factorization(theta: ActionMorphism) -> tuple[ActionMorphism, ActionMorphism]:
    """Split ``theta = rho ∘ tau`` with ``tau`` onto the image and ``rho`` an inclusion."""
    t = theta.target
    image = ActionSignature(
        FrozenMap({b: t.actions[b] for b in theta.on_actions.values()}),
        FrozenMap({b: t.messages[b] for b in theta.on_messages.values()}),
        t.domain.restrict(theta.on_vars.values()),
        t.arg_range,
    )
    tau = ActionMorphism(theta.source, image, theta.on_actions, theta.on_messages, theta.on_vars)
    rho = ActionMorphism.inclusion(image, t)
    return tau, rho


def amalgamate(theta1: ActionMorphism, theta2: ActionMorphism, omega1: ActionStructure,
               omega2: ActionStructure, span: tuple[ActionMorphism, ActionMorphism] | None = None,
               cap: int | None = None) -> ActionStructure:
    """``Omega_R = tau1(Omega1) ||' tau2(Omega2)`` for a pushout square.

    ``span`` (the legs ``sigma1, sigma2`` from the apex) enables the
    commutation and compatibility precondition checks.
    """
    if theta1.target != theta2.target:
        raise AmalgamationError("theta1 and theta2 must share their target")
    if not (theta1.messages_injective() and theta2.messages_injective()):
        raise AmalgamationError("message mappings must be injective")
    if omega1.sig != theta1.source or omega2.sig != theta2.source:
        raise AmalgamationError("structures do not match the morphism sources")
    if span is not None:
        s1, s2 = span
        if s1.then(theta1) != s2.then(theta2):
            raise AmalgamationError("the square does not commute")
        if not (s1.messages_injective() and s2.messages_injective()):
            raise AmalgamationError("message mappings must be injective")
        if reduct_structure(s1, omega1).transitions != reduct_structure(s2, omega2).transitions:
            raise AmalgamationError("structures disagree on the shared part")
    tau1, _ = image_factorization(theta1)
    tau2, _ = image_factorization(theta2)
    if tau1.target.union(tau2.target) != theta1.target:
        raise AmalgamationError("the morphisms are not jointly surjective")
    left = translate_structure(tau1, omega1, extra_msgs=0, cap=cap)
    right = translate_structure(tau2, omega2, extra_msgs=0, cap=cap)
    joint = interleave_actions_shared(left, right, cap=cap)
    return ActionStructure(theta1.target, joint.transitions)


def check_amalgamation(theta1: ActionMorphism, theta2: ActionMorphism, omega1: ActionStructure,
                       omega2: ActionStructure, omega_r: ActionStructure) -> tuple[bool, bool]:
    """Whether the reducts of ``omega_r`` along both legs recover the inputs."""
    return (reduct_structure(theta1, omega_r).transitions == omega1.transitions,
            reduct_structure(theta2, omega_r).transitions == omega2.transitions)
