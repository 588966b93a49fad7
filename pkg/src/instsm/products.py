"""Interleaving products, determinism checks and the unit machine.

A product configuration has one joint pool over ``E1 ∪ E2 ∪ F1 ∪ F2`` and
a pair of states.  The extracted event (completion events first) belongs to
exactly one side, which steps; the other side's state is unchanged and so
are the variables private to it.  Messages accepted by either side are put
into the joint pool; the rest are emitted.
"""
from __future__ import annotations

import itertools
from collections import defaultdict
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass

from ._util import FrozenMap, canonical, sort_key
from .actions import (
    ActionSignature,
    ActionStructure,
    DetVerdict,
    compatible,
    interleave_actions,
    is_deterministic,
)
from .errors import SignatureClash
from .guards import Valuation, ValueDomain, guards_disjoint, substitute
from .machines import (
    EMPTY_POOL,
    CanonicalMachine,
    Configuration,
    DeltaStep,
    EventInstance,
    ExplorationBounds,
    Machine,
    MachineStructure,
    SMSentence,
    SMSignature,
    SMTransition,
    StructureMachine,
    event_of_message,
    materialize,
    message_ops,
    pool_extract,
    pool_insert,
    sm_sat,
)

__all__ = [
    "DetVerdict", "ProductMachine", "product_signature", "interleave_structures",
    "interleave_sentences", "unit_machine", "unit_sentence", "iso_check", "det_syntactic",
    "det_semantic", "det_delta", "det_machine", "check_theorem1", "check_theorem2",
    "check_theorem4", "commutativity_witness", "associativity_witness", "unit_witness",
]


def product_signature(h1: ActionSignature, s1: SMSignature, h2: ActionSignature,
                      s2: SMSignature) -> tuple[ActionSignature, SMSignature]:
    """``<Ĥ, Σ̂>``: unions of the action parts and events, product of the states."""
    clash = []
    if set(s1.events) & set(s2.events):
        clash.append(f"shared events {sorted(set(s1.events) & set(s2.events))}")
    if s1.completions & s2.completions:
        clash.append(f"shared completion events {sorted(s1.completions & s2.completions)}")
    if s1.states & s2.states:
        clash.append(f"shared states {sorted(map(str, s1.states & s2.states))}")
    if clash:
        raise SignatureClash("; ".join(clash))
    try:
        h = h1.union(h2)
    except Exception as exc:  # arity or domain disagreement
        raise SignatureClash(str(exc)) from None
    events = dict(s1.events)
    events.update(s2.events)
    sig = SMSignature(FrozenMap(events), s1.completions | s2.completions,
                      frozenset(itertools.product(sorted(s1.states, key=sort_key),
                                                  sorted(s2.states, key=sort_key))))
    return h, sig


def _as_machine(m) -> Machine:
    if isinstance(m, MachineStructure):
        return StructureMachine(m)
    return m


class ProductMachine:
    """``Theta1 || Theta2`` as a step oracle over two component oracles."""

    def __init__(self, m1, m2):
        self.m1 = _as_machine(m1)
        self.m2 = _as_machine(m2)
        self.h, self.sig = product_signature(self.m1.h, self.m1.sig, self.m2.h, self.m2.sig)
        ops = message_ops(self.h)
        self._stimuli = tuple(sorted(e for e in set(self.m1.stimuli()) | set(self.m2.stimuli())
                                     if e.completion or e.name not in ops))

    def initial_state(self):
        return (self.m1.initial_state(), self.m2.initial_state())

    def gamma(self):
        v1, v2 = self.m1.h.vars, self.m2.h.vars
        g1, g2 = self.m1.gamma(), self.m2.gamma()
        return frozenset(w for w in self.h.domain.valuations()
                         if w.restrict(v1) in g1 and w.restrict(v2) in g2)

    def stimuli(self):
        return self._stimuli

    def owner(self, e: EventInstance) -> int:
        side = self.m1.sig
        if (e.completion and e.name in side.completions) or (not e.completion and e.name in side.events):
            return 0
        return 1

    def steps(self, c: Configuration, capacity):
        sides = (self.m1, self.m2)
        out = set()
        for p, rest in pool_extract(c.pool):
            i = self.owner(p)
            side = sides[i]
            mine = [e for e in rest.events() if self.owner(e) == i]
            side_rest = pool_insert(EMPTY_POOL, mine)
            side_pool = pool_insert(side_rest, [p])
            side_cfg = Configuration(c.omega.restrict(side.h.vars), side_pool, c.state[i])
            for st in side.steps(side_cfg, None):
                if st.trigger != p:
                    continue
                inserted = list(st.target.pool.events() - side_rest.events())
                emitted = []
                for m in st.emitted:
                    e = event_of_message(m, self.sig)
                    if e is None:
                        emitted.append(m)
                    else:
                        inserted.append(e)
                pool = pool_insert(rest, inserted, capacity)
                state = (st.target.state, c.state[1]) if i == 0 else (c.state[0], st.target.state)
                out.add(DeltaStep(c, p, frozenset(emitted),
                                  Configuration(c.omega.update(st.target.omega), pool, state)))
        return frozenset(out)


def interleave_structures(pair1, pair2, bounds: ExplorationBounds | None = None):
    """``<Omega1, Theta1> || <Omega2, Theta2>``.

    Each ``Theta`` may be a materialized MachineStructure or a step oracle
    such as a CanonicalMachine; the product is materialized within bounds.
    """
    omega1, th1 = pair1
    omega2, th2 = pair2
    machine = ProductMachine(th1, th2)
    return interleave_actions(omega1, omega2), materialize(machine, bounds or ExplorationBounds())


def interleave_sentences(phi1: SMSentence, phi2: SMSentence) -> SMSentence:
    """Syntactic product: each side's transitions with the other state frozen."""
    h, sig = product_signature(phi1.h, phi1.sig, phi2.h, phi2.sig)
    ts = set()
    for t in phi1.transitions:
        for s2 in phi2.sig.states:
            ts.add(SMTransition((t.source, s2), t.trigger, t.params, t.guard, t.action,
                                t.action_args, t.completions, (t.target, s2)))
    for t in phi2.transitions:
        for s1 in phi1.sig.states:
            ts.add(SMTransition((s1, t.source), t.trigger, t.params, t.guard, t.action,
                                t.action_args, t.completions, (s1, t.target)))
    return SMSentence(h, sig, (phi1.initial, phi2.initial), frozenset(ts))


# ----------------------------------------------------------------- unit


UNIT_STATE = "s0_unit"


def unit_sentence() -> SMSentence:
    h = ActionSignature.make()
    sig = SMSignature.make(states=[UNIT_STATE])
    return SMSentence(h, sig, UNIT_STATE, frozenset())


def unit_machine():
    """``(Omega_eps, CanonicalMachine)`` with no events, messages or variables, one state."""
    phi = unit_sentence()
    omega = ActionStructure(phi.h, frozenset())
    return omega, CanonicalMachine(omega, phi, gamma=[Valuation()], stimuli=())


# ----------------------------------------------------------- isomorphisms


def _rename_config(c: Configuration, fs: Callable, fv: Mapping[str, str]) -> Configuration:
    return Configuration(Valuation({fv.get(k, k): v for k, v in c.omega.items()}), c.pool, fs(c.state))


def iso_check(theta_a: MachineStructure, theta_b: MachineStructure, state_bijection,
              var_bijection: Mapping[str, str] | None = None) -> bool:
    """Whether the bijections carry initial data and transitions of ``theta_a`` onto ``theta_b``."""
    fs = state_bijection if callable(state_bijection) else (lambda s, m=state_bijection: m[s])
    fv = dict(var_bijection or {})
    if len(set(fv.values())) != len(fv):
        return False
    try:
        mapped_states = {fs(s) for s in theta_a.sig.states}
    except KeyError:
        return False
    if len(mapped_states) != len(theta_a.sig.states) or mapped_states != set(theta_b.sig.states):
        return False
    if fs(theta_a.initial) != theta_b.initial:
        return False
    gamma = {Valuation({fv.get(k, k): v for k, v in w.items()}) for w in theta_a.gamma}
    if gamma != set(theta_b.gamma):
        return False
    delta = {DeltaStep(_rename_config(d.source, fs, fv), d.trigger, d.emitted,
                       _rename_config(d.target, fs, fv)) for d in theta_a.delta}
    return delta == set(theta_b.delta)


def commutativity_witness(state):
    return (state[1], state[0])


def associativity_witness(state):
    (s1, s2), s3 = state
    return (s1, (s2, s3))


def unit_witness(state):
    """``(s, s0_unit) -> s`` for a right unit."""
    return state[0]


# -------------------------------------------------------------- determinism


def _pairs(groups: Iterable[list]):
    for group in groups:
        for a, b in itertools.combinations(group, 2):
            yield a, b


def det_syntactic(phi_or_T) -> DetVerdict:
    ts = phi_or_T.transitions if isinstance(phi_or_T, SMSentence) else phi_or_T
    groups = defaultdict(list)
    for t in ts:
        groups[(t.source, t.trigger)].append(t)
    for key in sorted(groups, key=sort_key):
        if len(groups[key]) > 1:
            return DetVerdict("syntactic", False, tuple(canonical(groups[key])[:2]))
    return DetVerdict("syntactic", True)


def _positional(t: SMTransition):
    return substitute(t.guard, {p: f"${i}" for i, p in enumerate(t.params)})


def det_semantic(phi: SMSentence, dom: ValueDomain | None = None, cap: int | None = None) -> DetVerdict:
    """Transitions sharing source and trigger must have disjoint guards.

    Trigger parameters are renamed positionally and range over the
    argument range, so guards on parameters count as well.
    """
    dom = phi.h.domain if dom is None else dom
    groups = defaultdict(list)
    for t in phi.transitions:
        groups[(t.source, t.trigger)].append(t)
    lo, hi = phi.h.arg_range
    for key in sorted(groups, key=sort_key):
        group = canonical(groups[key])
        if len(group) < 2:
            continue
        n = len(group[0].params)
        full = dom.union(ValueDomain(FrozenMap({f"${i}": (lo, hi) for i in range(n)})))
        for a, b in itertools.combinations(group, 2):
            if not guards_disjoint(_positional(a), _positional(b), full, cap):
                return DetVerdict("semantic", False, (a, b))
    return DetVerdict("semantic", True)


def det_delta(theta: MachineStructure) -> DetVerdict:
    """At most one outcome per configuration and extracted event."""
    groups = defaultdict(set)
    for d in theta.delta:
        groups[(d.source, d.trigger)].add((d.emitted, d.target))
    for key in sorted(groups, key=sort_key):
        if len(groups[key]) > 1:
            steps = canonical(DeltaStep(key[0], key[1], e, t) for e, t in groups[key])
            return DetVerdict("delta", False, tuple(steps[:2]))
    return DetVerdict("delta", True)


def det_machine(omega: ActionStructure, theta: MachineStructure) -> DetVerdict:
    a = is_deterministic(omega)
    if not a:
        return DetVerdict("machine", False, a.witness)
    d = det_delta(theta)
    if not d:
        return DetVerdict("machine", False, d.witness)
    return DetVerdict("machine", True)


# ------------------------------------------------------------------ theorems


@dataclass(frozen=True)
class TheoremReport:
    name: str
    premises: Mapping[str, bool]
    conclusion: bool | None
    detail: str = ""

    @property
    def premises_hold(self) -> bool:
        return all(self.premises.values())

    @property
    def holds(self) -> bool:
        """False only when all premises hold and the conclusion fails."""
        return not self.premises_hold or bool(self.conclusion)

    def to_json(self):
        return {"theorem": self.name, "premises": dict(sorted(self.premises.items())),
                "conclusion": self.conclusion, "holds": self.holds, "detail": self.detail}


def check_theorem1(omega: ActionStructure, phi: SMSentence, gamma=None,
                   bounds: ExplorationBounds | None = None) -> TheoremReport:
    """Deterministic T and Omega imply a deterministic canonical transition relation."""
    syn = det_syntactic(phi).holds
    sem = syn or det_semantic(phi).holds
    det_omega = is_deterministic(omega).holds
    theta = materialize(CanonicalMachine(omega, phi, gamma), bounds or ExplorationBounds())
    concl = det_delta(theta)
    return TheoremReport("1", {"T deterministic": syn or sem, "Omega deterministic": det_omega},
                         concl.holds, "" if concl.holds else str(concl.witness))


def check_theorem2(inst1, inst2, bounds: ExplorationBounds | None = None) -> TheoremReport:
    """Semantic product satisfies the syntactic product sentence (bounded).

    ``inst`` is ``(Omega, phi, gamma)``; each component model is the
    canonical model of its sentence, checked with ``sm_sat`` first.
    """
    bounds = bounds or ExplorationBounds()
    (o1, p1, g1), (o2, p2, g2) = inst1, inst2
    m1, m2 = CanonicalMachine(o1, p1, g1), CanonicalMachine(o2, p2, g2)
    pre1 = sm_sat(o1, materialize(m1, bounds), p1)
    pre2 = sm_sat(o2, materialize(m2, bounds), p2)
    omega, theta = interleave_structures((o1, m1), (o2, m2), bounds)
    phi = interleave_sentences(p1, p2)
    ok = sm_sat(omega, theta, phi)
    return TheoremReport("2", {"component 1 satisfies": pre1, "component 2 satisfies": pre2}, ok)


def check_theorem4(pair1, pair2, bounds: ExplorationBounds | None = None) -> TheoremReport:
    """Products of deterministic machines with compatible action relations are deterministic.

    ``pair`` is ``(Omega, machine)`` where the machine is a step oracle or a
    materialized structure.  Precondition failures are reported, not raised.
    """
    bounds = bounds or ExplorationBounds()
    (o1, m1), (o2, m2) = pair1, pair2
    th1 = m1 if isinstance(m1, MachineStructure) else materialize(m1, bounds)
    th2 = m2 if isinstance(m2, MachineStructure) else materialize(m2, bounds)
    premises = {
        "machine 1 deterministic": det_machine(o1, th1).holds,
        "machine 2 deterministic": det_machine(o2, th2).holds,
        "compatible": compatible(o1, o2),
    }
    if not all(premises.values()):
        failed = ", ".join(k for k, v in premises.items() if not v)
        return TheoremReport("4", premises, None, f"precondition failed: {failed}")
    omega, theta = interleave_structures((o1, m1), (o2, m2), bounds)
    a = is_deterministic(omega)
    d = det_delta(theta)
    detail = ""
    if not a:
        detail = f"action product not deterministic: {a.witness}"
    elif not d:
        detail = f"transition relation not deterministic: {d.witness}"
    return TheoremReport("4", premises, a.holds and d.holds, detail)
