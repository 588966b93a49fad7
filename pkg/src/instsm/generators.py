"""Seeded generators of small random instances.

Sizes stay small on purpose (at most three states, two variables with
ranges inside ``0..2`` and three events per machine) so that brute-force
oracles finish quickly.  Every generator takes a ``random.Random``.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

from ._util import FrozenMap
from .actions import (
    SKIP,
    SKIP_PROGRAM,
    ActionMorphism,
    ActionProgram,
    ActionSentence,
    ActionSignature,
    ActionStructure,
    ActionTransition,
    Assign,
    MessageInstance,
    Send,
    materialize_structure,
)
from .guards import (
    TRUE,
    And,
    BinOp,
    BoolConst,
    Compare,
    Const,
    GuardMorphism,
    GuardSignature,
    Not,
    Or,
    Valuation,
    ValueDomain,
    Var,
)
from .machines import SMMorphism, SMSentence, SMSignature, SMTransition, message_ops

CMP_OPS = ("<", "<=", "==", "!=", ">=", ">")


def rng(seed) -> random.Random:
    return seed if isinstance(seed, random.Random) else random.Random(seed)


# ------------------------------------------------------------------- guards


def random_atom(r: random.Random, names, lo: int = 0, hi: int = 2):
    if names and r.random() < 0.65:
        return Var(r.choice(sorted(names)))
    return Const(r.randint(lo, hi))


def random_guard(r: random.Random, names, depth: int = 2):
    roll = r.random()
    if depth <= 0 or roll < 0.4:
        if r.random() < 0.08:
            return BoolConst(r.random() < 0.5)
        return Compare(r.choice(CMP_OPS), random_atom(r, names), random_atom(r, names))
    if roll < 0.65:
        return And(random_guard(r, names, depth - 1), random_guard(r, names, depth - 1))
    if roll < 0.88:
        return Or(random_guard(r, names, depth - 1), random_guard(r, names, depth - 1))
    return Not(random_guard(r, names, depth - 1))


def random_domain(r: random.Random, names, hi_max: int = 2) -> ValueDomain:
    return ValueDomain(FrozenMap({n: (0, r.randint(1, hi_max)) for n in names}))


def random_valuation(r: random.Random, dom: ValueDomain) -> Valuation:
    return Valuation({n: r.randint(lo, hi) for n, (lo, hi) in dom.ranges.items()})


def random_guard_instance(r: random.Random):
    """``(v, g, omega')`` with ``g`` over the source of ``v`` and ``omega'`` over its target."""
    src = [f"x{i}" for i in range(r.randint(1, 3))]
    tgt = [f"y{i}" for i in range(r.randint(1, 3))]
    v = GuardMorphism(GuardSignature(frozenset(src)), GuardSignature(frozenset(tgt)),
                      FrozenMap({x: r.choice(tgt) for x in src}))
    g = random_guard(r, src, depth=r.randint(0, 3))
    dom = ValueDomain(FrozenMap({y: (0, 3) for y in tgt}))
    return v, g, random_valuation(r, dom)


# ------------------------------------------------------------------ actions


def random_int_expr(r: random.Random, names, depth: int = 1, hi: int = 2):
    if depth <= 0 or r.random() < 0.6:
        return random_atom(r, names, 0, hi)
    return BinOp(r.choice("+-*"), random_int_expr(r, names, depth - 1, hi),
                 random_int_expr(r, names, depth - 1, hi))


def random_program(r: random.Random, sig: ActionSignature, params=(), vars=None, messages=None,
                   max_len: int = 2) -> ActionProgram:
    """Random straight-line program; it may abort on some valuations."""
    vars = sorted(sig.vars if vars is None else vars)
    messages = sorted(sig.messages if messages is None else messages)
    scope = sorted(set(sig.vars) | set(params))
    body = []
    for _ in range(r.randint(0, max_len)):
        if vars and (not messages or r.random() < 0.6):
            body.append(Assign(r.choice(vars), random_int_expr(r, scope, 1)))
        elif messages:
            m = r.choice(messages)
            body.append(Send(m, tuple(random_int_expr(r, scope, 0, sig.arg_range[1])
                                      for _ in range(sig.messages[m]))))
    return ActionProgram(tuple(params), tuple(body))


def safe_program(r: random.Random, sig: ActionSignature, vars, messages, max_len: int = 2):
    """Statements that never abort: constant in-range assignments and constant sends."""
    body = []
    vars, messages = sorted(vars), sorted(messages)
    lo, hi = sig.arg_range
    for _ in range(r.randint(0, max_len)):
        if vars and (not messages or r.random() < 0.5):
            v = r.choice(vars)
            a, b = sig.domain.ranges[v]
            body.append(Assign(v, Const(r.randint(a, b))))
        elif messages:
            m = r.choice(messages)
            body.append(Send(m, tuple(Const(r.randint(lo, hi)) for _ in range(sig.messages[m]))))
    return tuple(body)


def random_action_signature(r: random.Random, prefix: str = "", max_vars: int = 2, max_actions: int = 2,
                            max_msgs: int = 2, hi_max: int = 2, arg_range=(0, 1)):
    """Returns ``(sig, defs)`` with a random program for every action."""
    vars = [f"{prefix}x{i}" for i in range(r.randint(0, max_vars))]
    dom = random_domain(r, vars, hi_max)
    actions = {f"{prefix}a{i}": r.randint(0, 1) for i in range(r.randint(1, max_actions))}
    msgs = {f"{prefix}m{i}": r.randint(0, 1) for i in range(r.randint(0, max_msgs))}
    sig = ActionSignature(FrozenMap(actions), FrozenMap(msgs), dom, tuple(arg_range))
    defs = {a: random_program(r, sig, tuple(f"p{j}" for j in range(n))) for a, n in actions.items()}
    return sig, defs


def random_action_structure(r: random.Random, sig: ActionSignature, defs=None, noise: int = 0):
    """Materialized structure, optionally with ``noise`` arbitrary extra transitions."""
    if defs is None:
        defs = {a: random_program(r, sig, tuple(f"p{j}" for j in range(n))) for a, n in sig.actions.items()}
    base = materialize_structure(sig, defs)
    extra = set()
    vals = sig.domain.valuations()
    insts = sig.action_instances()
    msgs = sig.message_instances()
    for _ in range(noise):
        if not insts:
            break
        m = frozenset(r.sample(msgs, r.randint(0, min(1, len(msgs)))))
        extra.add(ActionTransition(r.choice(vals), r.choice(insts), m, r.choice(vals)))
    return ActionStructure(sig, base.transitions | frozenset(extra))


def random_action_morphism(r: random.Random, src: ActionSignature, prefix: str = "t",
                           injective_messages: bool = False, extra: int = 1) -> ActionMorphism:
    """A morphism out of ``src`` into a fresh larger signature.

    Variables of equal range and actions or messages of equal arity may be
    merged, so the morphism need not be injective.
    """
    def assign(items, same_kind, allow_merge):
        mapping, targets = {}, {}
        for name, kind in sorted(items.items()):
            pool = [t for t, k in targets.items() if k == kind]
            if allow_merge and pool and r.random() < 0.3:
                mapping[name] = r.choice(sorted(pool))
            else:
                t = f"{prefix}{name}"
                mapping[name] = t
                targets[t] = kind
        for i in range(r.randint(0, extra)):
            targets[f"{prefix}new{same_kind}{i}"] = same_kind_default(same_kind)
        return mapping, targets

    def same_kind_default(kind):
        if kind == "v":
            return (0, r.randint(1, 2))
        return r.randint(0, 1)

    vmap, vt = assign(dict(src.domain.ranges), "v", True)
    amap, at = assign(dict(src.actions), "a", True)
    mmap, mt = assign(dict(src.messages), "m", not injective_messages)
    tgt = ActionSignature(FrozenMap(at), FrozenMap(mt), ValueDomain(FrozenMap(vt)), src.arg_range)
    return ActionMorphism(src, tgt, FrozenMap(amap), FrozenMap(mmap), FrozenMap(vmap))


def random_action_sentence(r: random.Random, sig: ActionSignature) -> ActionSentence:
    insts = sig.action_instances()
    msgs = sig.message_instances()
    chosen = r.sample(msgs, r.randint(0, min(1, len(msgs)))) if msgs else []
    return ActionSentence(random_guard(r, sig.vars, 1), r.choice(insts), frozenset(chosen),
                          random_guard(r, sig.vars, 1))


# ----------------------------------------------------------------- machines


@dataclass(frozen=True)
class MachineInstance:
    omega: ActionStructure
    phi: SMSentence
    gamma: frozenset

    @property
    def h(self):
        return self.phi.h

    @property
    def sig(self):
        return self.phi.sig

    def triple(self):
        return self.omega, self.phi, self.gamma


def _make_deterministic(r: random.Random, transitions: list[SMTransition]) -> list[SMTransition]:
    """At most two transitions per (source, trigger); a pair gets complementary guards."""
    groups: dict = {}
    for t in transitions:
        groups.setdefault((t.source, t.trigger), []).append(t)
    out = []
    for key in sorted(groups, key=str):
        group = groups[key][:2]
        if len(group) == 2 and r.random() < 0.7:
            a, b = group
            b = SMTransition(b.source, b.trigger, b.params, Not(a.guard), b.action, b.action_args,
                             b.completions, b.target)
            out += [a, b]
        else:
            out.append(group[0])
    return out


def random_machine(r: random.Random, prefix: str = "", max_states: int = 3, max_vars: int = 2,
                   max_events: int = 3, peer_events=None, shared_vars=None, shared_actions=None,
                   deterministic: bool = False, arg_range=(0, 1), max_transitions: int = 5,
                   self_messages: bool = True, events=None) -> MachineInstance:
    """A random behavioural machine whose names all start with ``prefix``.

    ``peer_events`` (name -> arity) adds messages addressed to another
    machine's events; ``shared_vars`` (name -> range) and ``shared_actions``
    (name -> body built over the shared part) are included verbatim, each
    shared action getting never-aborting private statements appended.
    """
    states = [f"{prefix}s{i}" for i in range(r.randint(1, max_states))]
    completions = sorted(s for s in states if r.random() < 0.4)
    if events is None:
        events = {f"{prefix}e{i}": r.randint(0, 1) for i in range(r.randint(1, max_events))}
    events = dict(events)
    vars = [f"{prefix}x{i}" for i in range(r.randint(0, max_vars))]
    ranges = {v: (0, r.randint(1, 2)) for v in vars}
    ranges.update(shared_vars or {})
    msgs = {f"{prefix}out.m{i}": r.randint(0, 1) for i in range(r.randint(0, 1))}
    if self_messages and r.random() < 0.3:
        e = r.choice(sorted(events))
        msgs[f"self.{e}"] = events[e]
    for e, n in sorted((peer_events or {}).items()):
        if r.random() < 0.6:
            msgs[f"peer.{e}"] = n
    for body in (shared_actions or {}).values():
        for st in body:
            if isinstance(st, Send):
                msgs.setdefault(st.message, len(st.args))
    private_actions = {f"{prefix}a{i}": r.randint(0, 1) for i in range(r.randint(0, 2))}
    actions = dict(private_actions)
    actions[SKIP] = 0
    for name in shared_actions or {}:
        actions[name] = 0
    h = ActionSignature(FrozenMap(actions), FrozenMap(msgs), ValueDomain(FrozenMap(ranges)), tuple(arg_range))
    defs = {SKIP: SKIP_PROGRAM}
    private_vars = sorted(set(vars))
    private_msgs = sorted(m for m in msgs if m.startswith(f"{prefix}out."))
    for a, n in private_actions.items():
        defs[a] = random_program(r, h, tuple(f"p{j}" for j in range(n)))
    for name, body in (shared_actions or {}).items():
        defs[name] = ActionProgram((), tuple(body) + safe_program(r, h, private_vars, private_msgs))
    omega = materialize_structure(h, defs)
    sig = SMSignature(FrozenMap(events), frozenset(completions), frozenset(states))
    triggers = sorted(events) + completions
    ts = []
    for _ in range(r.randint(0, max_transitions)):
        trig = r.choice(triggers)
        params = tuple(f"p{j}" for j in range(events.get(trig, 0)))
        guard = TRUE if r.random() < 0.45 else random_guard(r, sorted(ranges) + list(params), 1)
        act = r.choice(sorted(actions))
        args = tuple(random_atom(r, params, *arg_range) for _ in range(actions[act]))
        comps = frozenset(f for f in completions if r.random() < 0.3)
        ts.append(SMTransition(r.choice(states), trig, params, guard, act, args, comps, r.choice(states)))
    if deterministic:
        ts = _make_deterministic(r, ts)
    phi = SMSentence(h, sig, r.choice(states), frozenset(ts))
    vals = h.domain.valuations()
    gamma = frozenset(w for w in vals if r.random() < 0.5) or frozenset([r.choice(vals)])
    return MachineInstance(omega, phi, gamma)


def random_machine_pair(r: random.Random, shared_var: bool = True, **kw):
    """Two machines with disjoint events, completions and states.

    Each may send messages to the other's events; they may share a variable.
    Only the identity action ``skip`` is shared.
    """
    shared = {"g": (0, r.randint(1, 2))} if shared_var and r.random() < 0.5 else {}
    ev1 = {f"A_e{i}": r.randint(0, 1) for i in range(r.randint(1, 2))}
    m2 = random_machine(r, "B_", peer_events=ev1, shared_vars=shared, **kw)
    m1 = random_machine(r, "A_", peer_events=dict(m2.sig.events), shared_vars=shared, events=ev1, **kw)
    return m1, m2


def random_machine_triple(r: random.Random, **kw):
    a, b = random_machine_pair(r, shared_var=False, **kw)
    c = random_machine(r, "C_", peer_events=dict(a.sig.events), **kw)
    return a, b, c


def shared_action_pair(r: random.Random, **kw):
    """Compatible pair sharing a variable and an action.

    The shared action runs the same core on the shared part on both sides,
    followed by private statements that never abort, so both structures
    agree on ``H1 ∩ H2``.
    """
    hi = r.randint(1, 2)
    shared_vars = {"g": (0, hi)}
    core = []
    if r.random() < 0.8:
        core.append(Assign("g", r.choice([Const(r.randint(0, hi)), Var("g")])))
    if r.random() < 0.4:
        core.append(Send("bus.sync", ()))
    actions = {"sh": tuple(core)}
    m1 = random_machine(r, "A_", shared_vars=shared_vars, shared_actions=actions, self_messages=False,
                        deterministic=True, **kw)
    m2 = random_machine(r, "B_", shared_vars=shared_vars, shared_actions=actions, self_messages=False,
                        deterministic=True, **kw)
    return m1, m2


def incompatible_pair():
    """Fixed pair whose shared action disagrees on a shared variable."""
    out = []
    for prefix, value in (("A_", 0), ("B_", 1)):
        h = ActionSignature(FrozenMap({"sh": 0, SKIP: 0}), FrozenMap(), ValueDomain.of(g=(0, 1)))
        omega = materialize_structure(h, {"sh": ActionProgram((), (Assign("g", Const(value)),)),
                                          SKIP: SKIP_PROGRAM})
        sig = SMSignature.make({f"{prefix}go": 0}, (), [f"{prefix}s0"])
        t = SMTransition(f"{prefix}s0", f"{prefix}go", (), TRUE, "sh", (), frozenset(), f"{prefix}s0")
        phi = SMSentence(h, sig, f"{prefix}s0", frozenset([t]))
        out.append(MachineInstance(omega, phi, frozenset(h.domain.valuations())))
    return tuple(out)


def random_sm_morphism(r: random.Random, h: ActionSignature, sig: SMSignature, prefix: str = "T_"):
    """Injective morphism into a larger signature that keeps internal messages fixed.

    Returns ``(sigma, target_sig)``.  Events identified with messages keep
    their names, the rest are renamed; the target gains fresh events,
    completions and states.
    """
    ops = message_ops(h)
    on_events = {e: (e if e in ops else f"{prefix}{e}") for e in sig.events}
    on_comps = {f: f"{prefix}{f}" for f in sig.completions}
    on_states = {s: f"{prefix}{s}" for s in sig.states}
    events = {on_events[e]: n for e, n in sig.events.items()}
    for i in range(r.randint(0, 2)):
        events[f"{prefix}new{i}"] = r.randint(0, 1)
    comps = set(on_comps.values()) | {f"{prefix}newF{i}" for i in range(r.randint(0, 1))}
    states = set(on_states.values()) | {f"{prefix}newS{i}" for i in range(r.randint(0, 1))}
    target = SMSignature(FrozenMap(events), frozenset(comps), frozenset(states))
    return SMMorphism(sig, target, FrozenMap(on_events), FrozenMap(on_comps), FrozenMap(on_states)), target


def mutate_sentence(r: random.Random, phi: SMSentence) -> SMSentence:
    """Drop, retarget or add one transition."""
    ts = sorted(phi.transitions, key=str)
    states = sorted(phi.sig.states, key=str)
    roll = r.random()
    if ts and roll < 0.4:
        ts.pop(r.randrange(len(ts)))
    elif ts and roll < 0.7:
        i = r.randrange(len(ts))
        t = ts[i]
        ts[i] = SMTransition(t.source, t.trigger, t.params, t.guard, t.action, t.action_args,
                             t.completions, r.choice(states))
    else:
        triggers = sorted(phi.sig.events) + sorted(phi.sig.completions)
        trig = r.choice(triggers)
        params = tuple(f"p{j}" for j in range(phi.sig.events.get(trig, 0)))
        ts.append(SMTransition(r.choice(states), trig, params, TRUE, SKIP, (), frozenset(), r.choice(states)))
    return SMSentence(phi.h, phi.sig, phi.initial, frozenset(ts))


# ------------------------------------------------------------ pushout squares


@dataclass(frozen=True)
class PushoutSquare:
    span: tuple[ActionMorphism, ActionMorphism]
    omega1: ActionStructure
    omega2: ActionStructure


def random_pushout_span(r: random.Random):
    """Apex ``H`` with inclusions into ``H1`` and ``H2`` plus compatible structures.

    Shared actions run a common core over the apex variables and messages
    on both sides, followed by never-aborting private statements.  Private
    actions are arbitrary random programs.
    """
    arg_range = (0, 1)
    apex_vars = {f"v{i}": (0, r.randint(1, 2)) for i in range(r.randint(0, 1))}
    apex_msgs = {f"c{i}": r.randint(0, 1) for i in range(r.randint(0, 1))}
    apex_actions = {f"sa{i}": 0 for i in range(r.randint(0, 1))}
    apex = ActionSignature(FrozenMap(apex_actions), FrozenMap(apex_msgs),
                           ValueDomain(FrozenMap(apex_vars)), arg_range)
    cores = {a: random_program(r, apex).body for a in apex_actions}
    sides = []
    for prefix in ("L", "R"):
        pv = {f"{prefix}x{i}": (0, r.randint(1, 2)) for i in range(r.randint(0, 1))}
        pm = {f"{prefix}m{i}": r.randint(0, 1) for i in range(r.randint(0, 1))}
        pa = {f"{prefix}a{i}": r.randint(0, 1) for i in range(r.randint(0, 1))}
        h = ActionSignature(FrozenMap({**apex_actions, **pa}), FrozenMap({**apex_msgs, **pm}),
                            ValueDomain(FrozenMap({**apex_vars, **pv})), arg_range)
        defs = {a: ActionProgram((), cores[a] + safe_program(r, h, pv, pm)) for a in apex_actions}
        for a, n in pa.items():
            defs[a] = random_program(r, h, tuple(f"p{j}" for j in range(n)))
        sides.append((h, materialize_structure(h, defs)))
    (h1, o1), (h2, o2) = sides
    span = (ActionMorphism.inclusion(apex, h1), ActionMorphism.inclusion(apex, h2))
    return PushoutSquare(span, o1, o2)


def all_guards_pairs(names, depth: int = 0):
    """Comparisons between the given atoms (used for small exhaustive sweeps)."""
    atoms = [Var(n) for n in names] + [Const(c) for c in range(3)]
    for op, a, b in itertools.product(CMP_OPS, atoms, atoms):
        yield Compare(op, a, b)


__all__ = [
    "rng", "random_guard", "random_domain", "random_valuation", "random_guard_instance",
    "random_int_expr", "random_program", "safe_program", "random_action_signature",
    "random_action_structure", "random_action_morphism", "random_action_sentence", "MachineInstance",
    "random_machine", "random_machine_pair", "random_machine_triple", "shared_action_pair",
    "incompatible_pair", "random_sm_morphism", "mutate_sentence", "PushoutSquare",
    "random_pushout_span", "all_guards_pairs", "MessageInstance",
]
