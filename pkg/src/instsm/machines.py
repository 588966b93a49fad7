"""Behavioural and protocol state machines over an action structure.

Configurations are ``(omega, pool, state)``.  The canonical model of a
behavioural sentence is explored breadth-first within ``ExplorationBounds``;
whenever the pool runs empty the environment may insert one stimulus event.
Stimulus insertions are not transitions of the model and do not count
towards the depth bound.
"""
from __future__ import annotations

from collections import defaultdict, deque
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from functools import cached_property
from typing import Hashable, NamedTuple, Protocol

from ._util import FrozenMap, canonical, env_cap, jsonable, sort_key
from .actions import (
    ActionInstance,
    ActionMorphism,
    ActionSignature,
    ActionStructure,
    MessageInstance,
    op_name,
    reduct_structure,
)
from .errors import CapacityError, PoolCapacityError, WellFormednessError
from .guards import (
    TRUE,
    GuardExpr,
    IntExpr,
    Valuation,
    check_guard,
    eval_guard,
    eval_int,
    free_vars,
)

State = Hashable


def fmt_state(s: State) -> str:
    if isinstance(s, tuple):
        return "(" + ", ".join(fmt_state(x) for x in s) + ")"
    return str(s)


# -------------------------------------------------------------------- events


class EventInstance(NamedTuple):
    name: str
    args: tuple[int, ...] = ()
    completion: bool = False

    def __str__(self) -> str:
        if self.completion:
            return self.name
        return f"{self.name}({','.join(str(a) for a in self.args)})"

    def to_json(self) -> str:
        return str(self)


def ev(name: str, *args: int) -> EventInstance:
    return EventInstance(name, tuple(args))


def completion(name: str) -> EventInstance:
    return EventInstance(name, (), True)


class EventPool(NamedTuple):
    """A set of pending events kept as two canonically ordered segments."""

    completions: tuple[EventInstance, ...] = ()
    externals: tuple[EventInstance, ...] = ()

    @classmethod
    def of(cls, events: Iterable[EventInstance]) -> "EventPool":
        return pool_insert(EMPTY_POOL, events)

    def __len__(self) -> int:  # type: ignore[override]
        return len(self.completions) + len(self.externals)

    def __contains__(self, e: object) -> bool:  # type: ignore[override]
        return e in self.completions or e in self.externals

    def events(self) -> frozenset[EventInstance]:
        return frozenset(self.completions) | frozenset(self.externals)

    def is_empty(self) -> bool:
        return not self.completions and not self.externals

    def to_json(self):
        return {"completions": [str(e) for e in self.completions],
                "externals": [str(e) for e in self.externals]}


EMPTY_POOL = EventPool()


def pool_insert(pool: EventPool, incoming: Iterable[EventInstance],
                capacity: int | None = None) -> EventPool:
    """``pool ◁ incoming``; duplicates collapse, completions stay in their own segment."""
    comps = set(pool.completions)
    exts = set(pool.externals)
    for e in incoming:
        (comps if e.completion else exts).add(e)
    if capacity is not None and len(comps) + len(exts) > capacity:
        raise PoolCapacityError(f"pool would hold {len(comps) + len(exts)} events, bound is {capacity}")
    return EventPool(tuple(sorted(comps)), tuple(sorted(exts)))


def pool_extract(pool: EventPool) -> list[tuple[EventInstance, EventPool]]:
    """Choices for ``p :: rest``: every completion if any is pending, otherwise every external."""
    if pool.completions:
        return [(p, EventPool(pool.completions[:i] + pool.completions[i + 1:], pool.externals))
                for i, p in enumerate(pool.completions)]
    return [(p, EventPool((), pool.externals[:i] + pool.externals[i + 1:]))
            for i, p in enumerate(pool.externals)]


# ---------------------------------------------------------------- signatures


@dataclass(frozen=True)
class SMSignature:
    """``Sigma = (E, F, S)``; events carry arities, completions have none."""

    events: FrozenMap[str, int]
    completions: frozenset[str]
    states: frozenset[State]

    def __post_init__(self):
        object.__setattr__(self, "events", FrozenMap(self.events))
        object.__setattr__(self, "completions", frozenset(self.completions))
        object.__setattr__(self, "states", frozenset(self.states))

    @classmethod
    def make(cls, events=(), completions=(), states=()) -> "SMSignature":
        ev_table = FrozenMap(events) if isinstance(events, Mapping) else FrozenMap({e: 0 for e in events})
        return cls(ev_table, frozenset(completions), frozenset(states))

    def is_event(self, name: str) -> bool:
        return name in self.events

    def trigger_arity(self, name: str) -> int | None:
        if name in self.events:
            return self.events[name]
        if name in self.completions:
            return 0
        return None

    def to_json(self):
        return {"events": dict(sorted(self.events.items())),
                "completions": sorted(self.completions),
                "states": sorted((jsonable(s) for s in self.states), key=sort_key)}


def message_ops(h: ActionSignature) -> frozenset[str]:
    return frozenset(op_name(m) for m in h.messages)


def validate_signature(h: ActionSignature, sigma: SMSignature) -> list[str]:
    """Violations of ``E ∩ F = ∅`` and ``E ∩ S = ∅`` (empty when valid)."""
    problems = []
    for e in sorted(sigma.events):
        if e in sigma.completions:
            problems.append(f"event {e} is also a completion event")
        if e in sigma.states:
            problems.append(f"event {e} is also a state")
    for e, n in sorted(sigma.events.items()):
        for m, k in h.messages.items():
            if op_name(m) == e and k != n:
                problems.append(f"event {e}/{n} is identified with message {m}/{k} of different arity")
    return problems


@dataclass(frozen=True)
class SMMorphism:
    """``sigma = (sigma_E, sigma_F, sigma_S)``, each injective."""

    source: SMSignature
    target: SMSignature
    on_events: FrozenMap[str, str]
    on_completions: FrozenMap[str, str]
    on_states: FrozenMap[State, State]

    def __post_init__(self):
        for attr in ("on_events", "on_completions", "on_states"):
            object.__setattr__(self, attr, FrozenMap(getattr(self, attr)))

    @classmethod
    def identity(cls, sig: SMSignature) -> "SMMorphism":
        return cls(sig, sig, FrozenMap({e: e for e in sig.events}),
                   FrozenMap({f: f for f in sig.completions}), FrozenMap({s: s for s in sig.states}))

    @classmethod
    def from_partial(cls, source: SMSignature, target: SMSignature, events=None, completions=None,
                     states=None) -> "SMMorphism":
        def fill(names, given):
            given = dict(given or {})
            return FrozenMap({n: given.get(n, n) for n in names})

        return cls(source, target, fill(source.events, events),
                   fill(source.completions, completions), fill(source.states, states))

    def on_trigger(self, name: str) -> str:
        """``sigma_P`` on names."""
        if name in self.on_events:
            return self.on_events[name]
        return self.on_completions[name]

    def map_event(self, e: EventInstance) -> EventInstance:
        table = self.on_completions if e.completion else self.on_events
        return EventInstance(table[e.name], e.args, e.completion)

    @cached_property
    def _inverse(self):
        return ({t: s for s, t in self.on_events.items()},
                {t: s for s, t in self.on_completions.items()},
                {t: s for s, t in self.on_states.items()})

    def inv_event(self, e: EventInstance) -> EventInstance | None:
        inv_e, inv_f, _ = self._inverse
        table = inv_f if e.completion else inv_e
        name = table.get(e.name)
        return None if name is None else EventInstance(name, e.args, e.completion)

    def inv_state(self, s: State):
        return self._inverse[2].get(s, _MISSING)

    def inv_pool(self, pool: EventPool) -> EventPool:
        """``sigma_P^-1``: drop events outside the preimage."""
        kept = (self.inv_event(e) for e in pool.events())
        return pool_insert(EMPTY_POOL, (e for e in kept if e is not None))

    def then(self, other: "SMMorphism") -> "SMMorphism":
        return SMMorphism(self.source, other.target,
                          FrozenMap({e: other.on_events[x] for e, x in self.on_events.items()}),
                          FrozenMap({f: other.on_completions[x] for f, x in self.on_completions.items()}),
                          FrozenMap({s: other.on_states[x] for s, x in self.on_states.items()}))

    def to_json(self):
        return {"events": dict(sorted(self.on_events.items())),
                "completions": dict(sorted(self.on_completions.items())),
                "states": [[jsonable(a), jsonable(b)] for a, b in
                           sorted(self.on_states.items(), key=lambda kv: sort_key(kv[0]))]}


_MISSING = object()


def validate_morphism(sigma: SMMorphism, h: ActionSignature) -> list[str]:
    """Totality, injectivity and preservation of internal messages."""
    problems = []
    src, tgt = sigma.source, sigma.target
    for kind, table, dom, cod in (("event", sigma.on_events, src.events, tgt.events),
                                  ("completion", sigma.on_completions, src.completions, tgt.completions),
                                  ("state", sigma.on_states, src.states, tgt.states)):
        missing = set(dom) - set(table)
        if missing:
            problems.append(f"{kind} map undefined on {sorted(map(str, missing))}")
        for a, b in table.items():
            if a not in dom:
                problems.append(f"{kind} map has unknown source {fmt_state(a)}")
            if b not in cod:
                problems.append(f"{kind} {fmt_state(a)} mapped to undeclared {fmt_state(b)}")
        seen: dict = {}
        for a, b in table.items():
            if b in seen:
                problems.append(f"{kind} map is not injective: {fmt_state(seen[b])} and "
                                f"{fmt_state(a)} both map to {fmt_state(b)}")
            seen[b] = a
    for a, b in sigma.on_events.items():
        if b in tgt.events and a in src.events and src.events[a] != tgt.events[b]:
            problems.append(f"event {a} -> {b} changes arity")
    ops = message_ops(h)
    internal_src = {e for e in src.events if e in ops}
    internal_tgt = {e for e in tgt.events if e in ops}
    if internal_src != internal_tgt:
        problems.append("internal messages not preserved: "
                        f"{sorted(internal_src)} vs {sorted(internal_tgt)}")
    return problems


# ----------------------------------------------------------------- sentences


@dataclass(frozen=True)
class SMTransition:
    """``source -trigger(params)[guard]/action(args), {completions}-> target``."""

    source: State
    trigger: str
    params: tuple[str, ...]
    guard: GuardExpr
    action: str
    action_args: tuple[IntExpr, ...]
    completions: frozenset[str]
    target: State

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "action_args", tuple(self.action_args))
        object.__setattr__(self, "completions", frozenset(self.completions))

    def __str__(self) -> str:
        trig = self.trigger + (f"({', '.join(self.params)})" if self.params else "")
        args = f"({', '.join(str(a) for a in self.action_args)})" if self.action_args else ""
        comps = ", ".join(sorted(self.completions))
        return (f"{fmt_state(self.source)} -{trig}[{self.guard}]/{self.action}{args}, "
                f"{{{comps}}}-> {fmt_state(self.target)}")

    def to_json(self):
        return str(self)


@dataclass(frozen=True)
class SMSentence:
    """A behavioural sentence ``(s0, T)`` over ``(H, Sigma)``."""

    h: ActionSignature
    sig: SMSignature
    initial: State
    transitions: frozenset[SMTransition]

    def __post_init__(self):
        object.__setattr__(self, "transitions", frozenset(self.transitions))

    def check(self) -> list[str]:
        problems = list(validate_signature(self.h, self.sig))
        if self.initial not in self.sig.states:
            problems.append(f"initial state {fmt_state(self.initial)} is not declared")
        for t in sorted(self.transitions, key=sort_key):
            problems.extend(_check_transition(self.h, self.sig, t))
        return problems

    @cached_property
    def _by_source(self):
        table = defaultdict(list)
        for t in self.transitions:
            table[(t.source, t.trigger)].append(t)
        for k in table:
            table[k].sort(key=sort_key)
        return dict(table)

    def outgoing(self, state: State, trigger: str) -> list[SMTransition]:
        return self._by_source.get((state, trigger), [])

    def to_json(self):
        return {"initial": jsonable(self.initial),
                "transitions": sorted(str(t) for t in self.transitions)}


def _check_transition(h: ActionSignature, sig: SMSignature, t: SMTransition) -> list[str]:
    problems = []
    for s in (t.source, t.target):
        if s not in sig.states:
            problems.append(f"transition {t}: undeclared state {fmt_state(s)}")
    arity = sig.trigger_arity(t.trigger)
    if arity is None:
        problems.append(f"transition {t}: unknown trigger {t.trigger}")
    elif arity != len(t.params):
        problems.append(f"transition {t}: trigger {t.trigger} takes {arity} parameters")
    if set(t.params) & h.vars:
        problems.append(f"transition {t}: parameters shadow variables")
    scope = h.vars | set(t.params)
    if free_vars(t.guard) - scope:
        problems.append(f"transition {t}: guard mentions unknown {sorted(free_vars(t.guard) - scope)}")
    if h.actions.get(t.action) != len(t.action_args):
        problems.append(f"transition {t}: unknown action {t.action}/{len(t.action_args)}")
    for a in t.action_args:
        if free_vars(a) - scope:
            problems.append(f"transition {t}: action argument mentions unknown names")
    for f in t.completions:
        if f not in sig.completions:
            problems.append(f"transition {t}: {f} is not a completion event")
    return problems


@dataclass(frozen=True)
class PSMTransition:
    """``source -[pre] trigger(params) [post] / {msgs}, {completions}-> target``."""

    source: State
    pre: GuardExpr
    trigger: str
    params: tuple[str, ...]
    post: GuardExpr
    msgs: tuple[tuple[str, tuple[IntExpr, ...]], ...]
    completions: frozenset[str]
    target: State

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "msgs", tuple((n, tuple(a)) for n, a in self.msgs))
        object.__setattr__(self, "completions", frozenset(self.completions))

    def __str__(self) -> str:
        trig = self.trigger + (f"({', '.join(self.params)})" if self.params else "")
        msgs = ", ".join(f"{n}({', '.join(str(a) for a in args)})" for n, args in self.msgs)
        comps = ", ".join(sorted(self.completions))
        return (f"{fmt_state(self.source)} -[{self.pre}] {trig} [{self.post}] / {{{msgs}}}, "
                f"{{{comps}}}-> {fmt_state(self.target)}")

    def to_json(self):
        return str(self)


@dataclass(frozen=True)
class PSMSentence:
    """A protocol sentence ``(s0, e, T)`` with a dedicated error state."""

    h: ActionSignature
    sig: SMSignature
    initial: State
    error: State
    transitions: frozenset[PSMTransition]

    def __post_init__(self):
        object.__setattr__(self, "transitions", frozenset(self.transitions))

    def check(self) -> list[str]:
        problems = list(validate_signature(self.h, self.sig))
        for s in (self.initial, self.error):
            if s not in self.sig.states:
                problems.append(f"state {fmt_state(s)} is not declared")
        for t in sorted(self.transitions, key=sort_key):
            if t.target == self.error:
                problems.append(f"transition {t} targets the error state")
            for s in (t.source, t.target):
                if s not in self.sig.states:
                    problems.append(f"transition {t}: undeclared state {fmt_state(s)}")
            if self.sig.events.get(t.trigger) != len(t.params):
                problems.append(f"transition {t}: unknown event {t.trigger}/{len(t.params)}")
            scope = self.h.vars | set(t.params)
            for g in (t.pre, t.post):
                if free_vars(g) - scope:
                    problems.append(f"transition {t}: condition mentions unknown names")
            for n, args in t.msgs:
                if self.h.messages.get(n) != len(args):
                    problems.append(f"transition {t}: unknown message {n}/{len(args)}")
        return problems

    def outgoing(self, state: State, trigger: str) -> list[PSMTransition]:
        return sorted((t for t in self.transitions if t.source == state and t.trigger == trigger),
                      key=sort_key)

    def to_json(self):
        return {"initial": jsonable(self.initial), "error": jsonable(self.error),
                "transitions": sorted(str(t) for t in self.transitions)}


def translate_sm_sentence(sigma: SMMorphism, phi: SMSentence) -> SMSentence:
    """``sigma(s0, T)``: rename states, triggers and completion sets."""
    ts = frozenset(
        SMTransition(sigma.on_states[t.source], sigma.on_trigger(t.trigger), t.params, t.guard,
                     t.action, t.action_args, frozenset(sigma.on_completions[f] for f in t.completions),
                     sigma.on_states[t.target])
        for t in phi.transitions)
    return SMSentence(phi.h, sigma.target, sigma.on_states[phi.initial], ts)


def translate_psm_sentence(sigma: SMMorphism, psi: PSMSentence) -> PSMSentence:
    ts = frozenset(
        PSMTransition(sigma.on_states[t.source], t.pre, sigma.on_events[t.trigger], t.params, t.post,
                      t.msgs, frozenset(sigma.on_completions[f] for f in t.completions),
                      sigma.on_states[t.target])
        for t in psi.transitions)
    return PSMSentence(psi.h, sigma.target, sigma.on_states[psi.initial],
                       sigma.on_states[psi.error], ts)


# ----------------------------------------------------------- configurations


class Configuration(NamedTuple):
    omega: Valuation
    pool: EventPool
    state: State

    def to_json(self):
        return {"omega": self.omega.to_json(), "pool": self.pool.to_json(),
                "state": jsonable(self.state)}


class DeltaStep(NamedTuple):
    """One transition of a machine structure, annotated with the extracted event.

    ``trigger`` is None for steps whose event has no preimage under a reduct.
    """

    source: Configuration
    trigger: EventInstance | None
    emitted: frozenset
    target: Configuration

    def to_json(self):
        return {"from": self.source.to_json(),
                "trigger": None if self.trigger is None else str(self.trigger),
                "emit": sorted(str(m) for m in self.emitted),
                "to": self.target.to_json()}


@dataclass(frozen=True)
class ExplorationBounds:
    pool: int = 3
    depth: int = 12
    cap: int = field(default_factory=env_cap)

    def __post_init__(self):
        if min(self.pool, self.depth, self.cap) <= 0:
            raise WellFormednessError("bounds must be positive")

    def to_json(self):
        return {"pool": self.pool, "depth": self.depth, "cap": self.cap}


@dataclass(frozen=True)
class MachineStructure:
    """``Theta = (I, Delta)`` materialized over a bounded configuration space.

    ``explored`` holds the configurations whose successors are all present
    in ``delta``; ``stimuli`` are the events the environment may insert
    into an empty pool.
    """

    h: ActionSignature
    sig: SMSignature
    gamma: frozenset[Valuation]
    initial: State
    delta: frozenset[DeltaStep]
    explored: frozenset[Configuration]
    stimuli: tuple[EventInstance, ...] = ()
    bounds: ExplorationBounds | None = None

    def __post_init__(self):
        object.__setattr__(self, "gamma", frozenset(self.gamma))
        object.__setattr__(self, "delta", frozenset(self.delta))
        object.__setattr__(self, "explored", frozenset(self.explored))
        object.__setattr__(self, "stimuli", tuple(sorted(set(self.stimuli))))

    @property
    def init(self):
        return (self.gamma, self.initial)

    def initial_configs(self) -> list[Configuration]:
        return [Configuration(w, EMPTY_POOL, self.initial) for w in sorted(self.gamma)]

    @cached_property
    def _out(self):
        table = defaultdict(list)
        for d in self.delta:
            table[d.source].append(d)
        for k in table:
            table[k].sort(key=sort_key)
        return dict(table)

    def outgoing(self, c: Configuration) -> list[DeltaStep]:
        return self._out.get(c, [])

    def env_successors(self, c: Configuration) -> list[Configuration]:
        if not c.pool.is_empty():
            return []
        return [Configuration(c.omega, EventPool.of([e]), c.state) for e in self.stimuli]

    def to_json(self):
        return {
            "init": {"states": [jsonable(self.initial)],
                     "gamma": [w.to_json() for w in sorted(self.gamma)]},
            "stimuli": [str(e) for e in self.stimuli],
            "delta": [d.to_json() for d in canonical(self.delta)],
            "explored": len(self.explored),
        }


# ------------------------------------------------------------ canonical rules


def event_of_message(m: MessageInstance, sig: SMSignature) -> EventInstance | None:
    """The event identified with a message, if its operation name is an event."""
    name = op_name(m.name)
    if sig.events.get(name) == len(m.args):
        return EventInstance(name, m.args)
    return None


def _binding(t, e: EventInstance) -> dict[str, int]:
    return dict(zip(t.params, e.args))


def _enabled(t: SMTransition, omega: Valuation, e: EventInstance) -> bool:
    return eval_guard(t.guard, {**omega, **_binding(t, e)})


def canonical_step(omega_struct: ActionStructure, phi: SMSentence, c: Configuration,
                   capacity: int | None = None) -> frozenset[DeltaStep]:
    """All successors of ``c`` under the two canonical rules.

    Rule one fires an enabled transition whose action has an outcome in
    the action structure; rule two discards the extracted event when no
    transition for it is enabled.
    """
    out = set()
    sig = phi.sig
    for p, rest in pool_extract(c.pool):
        candidates = phi.outgoing(c.state, p.name)
        enabled = [t for t in candidates if _enabled(t, c.omega, p)]
        if not enabled:
            out.add(DeltaStep(c, p, frozenset(), Configuration(c.omega, rest, c.state)))
            continue
        for t in enabled:
            env = {**c.omega, **_binding(t, p)}
            inst = ActionInstance(t.action, tuple(eval_int(a, env) for a in t.action_args))
            comps = [completion(f) for f in t.completions]
            for at in omega_struct.outcomes(c.omega, inst):
                accepted, emitted = [], []
                for m in at.msgs:
                    e = event_of_message(m, sig)
                    (accepted if e is not None else emitted).append(e if e is not None else m)
                pool = pool_insert(rest, accepted + comps, capacity)
                out.add(DeltaStep(c, p, frozenset(emitted), Configuration(at.omega_prime, pool, t.target)))
    return frozenset(out)


class Machine(Protocol):
    """A step oracle: enough to explore a structure breadth-first."""

    h: ActionSignature
    sig: SMSignature

    def initial_state(self) -> State: ...

    def gamma(self) -> frozenset[Valuation]: ...

    def stimuli(self) -> tuple[EventInstance, ...]: ...

    def steps(self, c: Configuration, capacity: int | None) -> frozenset[DeltaStep]: ...


def default_stimuli(h: ActionSignature, sig: SMSignature) -> tuple[EventInstance, ...]:
    """External events not identified with any message, over the argument range."""
    import itertools

    ops = message_ops(h)
    lo, hi = h.arg_range
    out = []
    for e in sorted(sig.events):
        if e in ops:
            continue
        for args in itertools.product(range(lo, hi + 1), repeat=sig.events[e]):
            out.append(EventInstance(e, tuple(args)))
    return tuple(out)


def default_gamma(h: ActionSignature, init_guard: GuardExpr | None = None,
                  cap: int | None = None) -> frozenset[Valuation]:
    g = TRUE if init_guard is None else init_guard
    check_guard(g, h.vars)
    return frozenset(w for w in h.domain.valuations(cap) if eval_guard(g, w))


class CanonicalMachine:
    """The canonical model of a behavioural sentence, computed on demand."""

    def __init__(self, omega: ActionStructure, phi: SMSentence, gamma: Iterable[Valuation] | None = None,
                 stimuli: Iterable[EventInstance] | None = None):
        self.omega = omega
        self.phi = phi
        self.h = phi.h
        self.sig = phi.sig
        self._gamma = frozenset(default_gamma(self.h) if gamma is None else gamma)
        self._stimuli = tuple(default_stimuli(self.h, self.sig) if stimuli is None else stimuli)

    def initial_state(self):
        return self.phi.initial

    def gamma(self):
        return self._gamma

    def stimuli(self):
        return self._stimuli

    def steps(self, c, capacity):
        return canonical_step(self.omega, self.phi, c, capacity)


class StructureMachine:
    """A materialized structure seen as a step oracle; unexplored configurations stop."""

    def __init__(self, theta: MachineStructure):
        self.theta = theta
        self.h = theta.h
        self.sig = theta.sig

    def initial_state(self):
        return self.theta.initial

    def gamma(self):
        return self.theta.gamma

    def stimuli(self):
        return self.theta.stimuli

    def steps(self, c, capacity):
        if c not in self.theta.explored:
            raise _Unexplored()
        return frozenset(self.theta.outgoing(c))


class _Unexplored(Exception):
    pass


def materialize(machine: Machine, bounds: ExplorationBounds) -> MachineStructure:
    """Breadth-first exploration of a step oracle within ``bounds``.

    A configuration at the depth bound, or one with a successor whose pool
    would exceed the pool bound, stays unexplored (frontier).
    """
    start = [Configuration(w, EMPTY_POOL, machine.initial_state()) for w in sorted(machine.gamma())]
    stimuli = machine.stimuli()
    depth: dict[Configuration, int] = {}
    queue: deque[Configuration] = deque()
    for c in start:
        if c not in depth:
            depth[c] = 0
            queue.append(c)
    delta: set[DeltaStep] = set()
    explored: set[Configuration] = set()
    while queue:
        c = queue.popleft()
        d = depth[c]
        if c.pool.is_empty():
            explored.add(c)
            for e in stimuli:
                c2 = Configuration(c.omega, EventPool((), (e,)) if not e.completion else EventPool((e,), ()), c.state)
                if c2 not in depth:
                    depth[c2] = d
                    queue.append(c2)
            continue
        if d >= bounds.depth:
            continue
        try:
            steps = machine.steps(c, bounds.pool)
        except (PoolCapacityError, _Unexplored):
            continue
        explored.add(c)
        delta.update(steps)
        for st in steps:
            if st.target not in depth:
                depth[st.target] = d + 1
                queue.append(st.target)
        if len(depth) > bounds.cap:
            raise CapacityError(f"exploration exceeded cap {bounds.cap} with frontier {len(queue)}")
    return MachineStructure(machine.h, machine.sig, machine.gamma(), machine.initial_state(),
                            frozenset(delta), frozenset(explored), stimuli, bounds)


def materialize_canonical(omega: ActionStructure, phi: SMSentence, gamma: Iterable[Valuation] | None = None,
                          bounds: ExplorationBounds | None = None,
                          stimuli: Iterable[EventInstance] | None = None) -> MachineStructure:
    return materialize(CanonicalMachine(omega, phi, gamma, stimuli), bounds or ExplorationBounds())


def sm_sat(omega: ActionStructure, theta: MachineStructure, phi: SMSentence) -> bool:
    """Bounded satisfaction: correct initial state and, at every explored
    configuration, exactly the canonical successors; no steps elsewhere."""
    if theta.initial != phi.initial:
        return False
    capacity = theta.bounds.pool if theta.bounds else None
    for c in theta.explored:
        try:
            expected = canonical_step(omega, phi, c, capacity)
        except PoolCapacityError:
            return False
        if expected != frozenset(theta.outgoing(c)):
            return False
    return all(d.source in theta.explored for d in theta.delta)


def unsat_witness(omega: ActionStructure, theta: MachineStructure, phi: SMSentence):
    """First configuration (canonical order) where ``sm_sat`` fails, with the difference."""
    if theta.initial != phi.initial:
        return {"reason": "initial state differs"}
    capacity = theta.bounds.pool if theta.bounds else None
    for c in canonical(theta.explored):
        expected = canonical_step(omega, phi, c, capacity)
        actual = frozenset(theta.outgoing(c))
        if expected != actual:
            return {"configuration": c, "missing": canonical(expected - actual),
                    "spurious": canonical(actual - expected)}
    for d in canonical(theta.delta):
        if d.source not in theta.explored:
            return {"configuration": d.source, "spurious": [d]}
    return None


# ------------------------------------------------------------------- reducts


def _reduce_config(sigma: SMMorphism, c: Configuration):
    s = sigma.inv_state(c.state)
    if s is _MISSING:
        return None
    return Configuration(c.omega, sigma.inv_pool(c.pool), s)


def reduct_sm_structure(sigma: SMMorphism, theta: MachineStructure) -> MachineStructure:
    """``Theta'|sigma``: states through ``sigma_S^-1``, pools through ``sigma_P^-1``.

    Steps on events without preimage that leave the reduced configuration
    unchanged and emit nothing are dropped.
    """
    if theta.sig != sigma.target:
        raise WellFormednessError("structure is not over the morphism's target signature")
    s0 = sigma.inv_state(theta.initial)
    if s0 is _MISSING:
        raise WellFormednessError("initial state has no preimage")
    delta = set()
    for d in theta.delta:
        a, b = _reduce_config(sigma, d.source), _reduce_config(sigma, d.target)
        if a is None or b is None:
            continue
        trig = None if d.trigger is None else sigma.inv_event(d.trigger)
        if trig is None and a == b and not d.emitted:
            continue  # invisible stutter, e.g. discarding an event outside the preimage
        delta.add(DeltaStep(a, trig, d.emitted, b))
    explored = {r for r in (_reduce_config(sigma, c) for c in theta.explored) if r is not None}
    stimuli = tuple(e for e in (sigma.inv_event(x) for x in theta.stimuli) if e is not None)
    return MachineStructure(theta.h, sigma.source, theta.gamma, s0, frozenset(delta),
                            frozenset(explored), stimuli, theta.bounds)


@dataclass(frozen=True)
class FlatMorphism:
    """A morphism ``(eta, sigma)`` of the flat institution."""

    eta: ActionMorphism
    sigma: SMMorphism

    @classmethod
    def identity(cls, h: ActionSignature, sig: SMSignature) -> "FlatMorphism":
        return cls(ActionMorphism.identity(h), SMMorphism.identity(sig))

    def validate(self) -> list[str]:
        return validate_morphism(self.sigma, self.eta.target)

    def then(self, other: "FlatMorphism") -> "FlatMorphism":
        return FlatMorphism(self.eta.then(other.eta), self.sigma.then(other.sigma))

    def to_json(self):
        return {"actions": self.eta.to_json(), "machine": self.sigma.to_json()}


def _reduce_omega(eta: ActionMorphism, c: Configuration) -> Configuration:
    return Configuration(eta.reduct_valuation(c.omega), c.pool, c.state)


def flat_reduct(eta: ActionMorphism, sigma: SMMorphism,
                pair: tuple[ActionStructure, MachineStructure]) -> tuple[ActionStructure, MachineStructure]:
    """``<Omega', Theta'>|(eta, sigma) = <Omega'|eta, Theta'|sigma|eta>``.

    Besides taking ``eta_M^-1`` of emitted messages, valuations are reduced
    along ``eta_V`` so that the result lives over the source signature.
    """
    omega2, theta2 = pair
    omega = reduct_structure(eta, omega2)
    th = reduct_sm_structure(sigma, theta2)
    delta = frozenset(DeltaStep(_reduce_omega(eta, d.source), d.trigger, eta.inv_messages(d.emitted),
                                _reduce_omega(eta, d.target)) for d in th.delta)
    explored = frozenset(_reduce_omega(eta, c) for c in th.explored)
    gamma = frozenset(eta.reduct_valuation(w) for w in th.gamma)
    return omega, MachineStructure(eta.source, th.sig, gamma, th.initial, delta, explored,
                                   th.stimuli, th.bounds)


# ---------------------------------------------------------- protocol monitor


class PSMVerdict(NamedTuple):
    """``result`` is one of ``conforms``, ``violation``, ``error-state-reached``."""

    result: str
    trace: tuple = ()
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.result == "conforms"

    def to_json(self):
        return {"result": self.result, "detail": self.detail,
                "trace": [jsonable(x) for x in self.trace]}


def _sent_instances(d: DeltaStep) -> set[tuple[str, tuple[int, ...]]]:
    """Messages observable on a step: emitted ones plus events sent to the machine itself."""
    sent = {(op_name(m.name), m.args) for m in d.emitted}
    before = set(d.source.pool.events())
    if d.trigger is not None:
        before.discard(d.trigger)
    for e in d.target.pool.events() - before:
        if not e.completion:
            sent.add((e.name, e.args))
    return sent


def psm_step(psi: PSMSentence, states: frozenset, d: DeltaStep):
    """Advance the monitor over one structure step.

    Returns ``("ok", new_states)``, ``("stutter", states)``,
    ``("violation", detail)`` or ``("error", detail)``.
    """
    p = d.trigger
    if p is None or p.completion or p.name not in psi.sig.events:
        return "stutter", states
    enabled_any = False
    nxt = set()
    sent = _sent_instances(d)
    for q in sorted(states, key=sort_key):
        for t in psi.outgoing(q, p.name):
            env = {**d.source.omega, **dict(zip(t.params, p.args))}
            if not eval_guard(t.pre, env):
                continue
            enabled_any = True
            env2 = {**d.target.omega, **dict(zip(t.params, p.args))}
            if not eval_guard(t.post, env2):
                continue
            wanted = {(op_name(n), tuple(eval_int(a, env2) for a in args)) for n, args in t.msgs}
            if wanted <= sent:
                nxt.add(t.target)
    if not enabled_any:
        return "error", f"no transition of the protocol is enabled for {p} in {sorted(map(fmt_state, states))}"
    if not nxt:
        return "violation", f"{p}: post-condition or required messages not met"
    return "ok", frozenset(nxt)


def psm_check(theta: MachineStructure, psi: PSMSentence) -> PSMVerdict:
    """Lock-step monitor of a bounded structure against a protocol sentence.

    Breadth-first, so the reported trace is a shortest one.
    """
    missing = set(psi.sig.events) - set(theta.sig.events)
    if missing:
        raise WellFormednessError(f"protocol events {sorted(missing)} are not events of the machine")
    start_states = frozenset([psi.initial])
    queue: deque = deque()
    parent: dict = {}
    for c in theta.initial_configs():
        key = (c, start_states)
        if key not in parent:
            parent[key] = None
            queue.append(key)

    def trace_to(key, last=None):
        steps = []
        while parent[key] is not None:
            prev, step = parent[key]
            steps.append(step)
            key = prev
        steps.reverse()
        if last is not None:
            steps.append(last)
        return tuple(steps)

    while queue:
        key = queue.popleft()
        c, states = key
        for c2 in theta.env_successors(c):
            k2 = (c2, states)
            if k2 not in parent:
                parent[k2] = (key, {"stimulus": c2.pool.externals[0] if c2.pool.externals else None})
                queue.append(k2)
        for d in theta.outgoing(c):
            kind, val = psm_step(psi, states, d)
            if kind == "error":
                return PSMVerdict("error-state-reached", trace_to(key, d), val)
            if kind == "violation":
                return PSMVerdict("violation", trace_to(key, d), val)
            k2 = (d.target, val)
            if k2 not in parent:
                parent[k2] = (key, d)
                queue.append(k2)
    return PSMVerdict("conforms")
