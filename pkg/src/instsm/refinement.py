"""Theories, structured theories and bounded refinement checking.

A refinement ``T1 ~> hide(theta, translate(sigma, T2))`` is checked on
witness models: the canonical model of the behavioural theory ``T2`` is
lifted along ``sigma`` into the mediating signature, reduced along
``theta`` and tested against ``T1``.  A ``refines`` verdict therefore
only speaks about the explored bounded fragment, while counterexamples are
concrete steps of that fragment.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Any, NamedTuple

from ._util import jsonable
from .actions import (
    ActionMorphism,
    ActionSentence,
    ActionStructure,
    action_sat,
    op_name,
    reduct_structure,
    translate_structure,
)
from .errors import CapacityError, UnsupportedShape, WellFormednessError
from .guards import substitute
from .machines import (
    Configuration,
    DeltaStep,
    ExplorationBounds,
    FlatMorphism,
    MachineStructure,
    PSMSentence,
    PSMVerdict,
    SMMorphism,
    SMSentence,
    SMSignature,
    SMTransition,
    default_stimuli,
    flat_reduct,
    materialize_canonical,
    psm_check,
    psm_step,
    sm_sat,
    unsat_witness,
)

REFINES = "refines (bounded)"
COUNTEREXAMPLE = "counterexample"


@dataclass(frozen=True)
class Theory:
    """A flat signature with its sentences.

    ``omega`` is the action structure generated by the declared programs;
    it is the action part of witness models.  Membership of a model only
    consults the sentences.
    """

    h: Any
    sig: SMSignature
    sentences: tuple = ()
    omega: ActionStructure | None = None
    gamma: frozenset | None = None
    action_sentences: tuple[ActionSentence, ...] = ()

    @classmethod
    def of(cls, artifact) -> "Theory":
        """Theory of an elaborated machine, protocol or product."""
        return cls(artifact.h, artifact.sig, (artifact.sentence,), artifact.omega,
                   frozenset(artifact.gamma), tuple(artifact.action_sentences))

    @property
    def behavioural(self) -> SMSentence | None:
        found = [s for s in self.sentences if isinstance(s, SMSentence)]
        return found[0] if len(found) == 1 and len(self.sentences) == 1 else None


@dataclass(frozen=True)
class StructuredTheory:
    """A base theory followed by ``("translate", m)`` / ``("hide", m)`` steps."""

    base: Theory
    steps: tuple[tuple[str, FlatMorphism], ...] = ()

    @property
    def signature(self):
        h, sig = self.base.h, self.base.sig
        for kind, m in self.steps:
            if kind == "translate":
                h, sig = m.eta.target, m.sigma.target
            else:
                h, sig = m.eta.source, m.sigma.source
        return h, sig


def _plain(t) -> StructuredTheory:
    return t if isinstance(t, StructuredTheory) else StructuredTheory(t)


def translate_theory(sigma: FlatMorphism, t) -> StructuredTheory:
    st = _plain(t)
    _check_morphism(sigma)
    h, sig = st.signature
    if (sigma.eta.source, sigma.sigma.source) != (h, sig):
        raise WellFormednessError("translation morphism does not start at the theory's signature")
    return StructuredTheory(st.base, st.steps + (("translate", sigma),))


def hide_theory(theta: FlatMorphism, t) -> StructuredTheory:
    st = _plain(t)
    _check_morphism(theta)
    h, sig = st.signature
    if (theta.eta.target, theta.sigma.target) != (h, sig):
        raise WellFormednessError("hiding morphism does not end at the theory's signature")
    return StructuredTheory(st.base, st.steps + (("hide", theta),))


def _check_morphism(m: FlatMorphism):
    problems = m.validate()
    if problems:
        raise WellFormednessError("; ".join(problems))


# ------------------------------------------------------------ model classes


def theory_sat(t: Theory, model: tuple[ActionStructure, MachineStructure]) -> bool:
    omega, theta = model
    if not all(action_sat(omega, a) for a in t.action_sentences):
        return False
    for s in t.sentences:
        if isinstance(s, SMSentence):
            if not sm_sat(omega, theta, s):
                return False
        elif not psm_check(theta, s).ok:
            return False
    return True


def _same_model(a, b) -> bool:
    (oa, ta), (ob, tb) = a, b
    return (oa.transitions == ob.transitions and ta.initial == tb.initial and ta.gamma == tb.gamma
            and ta.delta == tb.delta and ta.explored == tb.explored)


def is_model(t, model, bounds: ExplorationBounds | None = None) -> bool:
    """Bounded membership in the model class of a (structured) theory.

    Under hiding, membership needs a witness: the model must be the reduct
    of one of the generated witness models of the inner theory.
    """
    st = _plain(t)
    if not st.steps:
        return theory_sat(st.base, model)
    kind, m = st.steps[-1]
    inner = StructuredTheory(st.base, st.steps[:-1])
    if kind == "translate":
        return is_model(inner, flat_reduct(m.eta, m.sigma, model), bounds)
    return any(_same_model(model, flat_reduct(m.eta, m.sigma, w)) for w in witness_models(inner, bounds))


def canonical_witness(t: Theory, bounds: ExplorationBounds | None = None):
    phi = t.behavioural
    if phi is None:
        raise UnsupportedShape("only theories with a single behavioural sentence have a canonical model")
    if t.omega is None:
        raise UnsupportedShape("theory has no action structure")
    theta = materialize_canonical(t.omega, phi, t.gamma, bounds or ExplorationBounds())
    return t.omega, theta


def translate_flat_sentence(m: FlatMorphism, phi: SMSentence) -> SMSentence:
    """Translate a behavioural sentence along a flat morphism (states, triggers, guards, actions)."""
    sigma, eta = m.sigma, m.eta
    ts = frozenset(
        SMTransition(sigma.on_states[t.source], sigma.on_trigger(t.trigger), t.params,
                     substitute(t.guard, eta.on_vars), eta.on_actions[t.action],
                     tuple(substitute(a, eta.on_vars) for a in t.action_args),
                     frozenset(sigma.on_completions[f] for f in t.completions),
                     sigma.on_states[t.target])
        for t in phi.transitions)
    return SMSentence(eta.target, sigma.target, sigma.on_states[phi.initial], ts)


def _is_identity_eta(eta: ActionMorphism) -> bool:
    return (eta.source == eta.target and all(a == b for a, b in eta.on_actions.items())
            and all(a == b for a, b in eta.on_messages.items())
            and all(a == b for a, b in eta.on_vars.items()))


def lift_model(m: FlatMorphism, t: Theory, bounds: ExplorationBounds | None = None):
    """Witness model over the target of ``m`` whose reduct is the canonical model of ``t``.

    New events of the target signature are discarded by the lifted machine.
    """
    bounds = bounds or ExplorationBounds()
    phi = t.behavioural
    if phi is None or t.omega is None:
        raise UnsupportedShape("lifting needs a behavioural theory")
    eta = m.eta
    omega = t.omega if _is_identity_eta(eta) else translate_structure(eta, t.omega, cap=bounds.cap)
    gamma = frozenset(w for w in eta.target.domain.valuations(bounds.cap)
                      if t.gamma is None or eta.reduct_valuation(w) in t.gamma)
    phi2 = translate_flat_sentence(m, phi)
    theta = materialize_canonical(omega, phi2, gamma, bounds, default_stimuli(eta.target, m.sigma.target))
    return omega, theta


def witness_models(t, bounds: ExplorationBounds | None = None) -> list:
    st = _plain(t)
    if not st.steps:
        return [canonical_witness(st.base, bounds)]
    kind, m = st.steps[-1]
    inner = StructuredTheory(st.base, st.steps[:-1])
    if kind == "hide":
        return [flat_reduct(m.eta, m.sigma, w) for w in witness_models(inner, bounds)]
    if inner.steps:
        raise UnsupportedShape("witnesses for a translation are only built from a plain theory")
    return [lift_model(m, inner.base, bounds)]


# ------------------------------------------------------------ refinement


class RefineVerdict(NamedTuple):
    result: str
    bounds: ExplorationBounds
    counterexample: Any = None
    detail: str = ""

    @property
    def refines(self) -> bool:
        return self.result == REFINES

    def to_json(self):
        out = {"result": self.result, "bounds": self.bounds.to_json()}
        if self.counterexample is not None:
            out["counterexample"] = jsonable(self.counterexample)
        if self.detail:
            out["detail"] = self.detail
        return out


def mediating_signature(theta: FlatMorphism, sigma: FlatMorphism) -> SMSignature:
    """The target of ``sigma`` enlarged by the states ``theta`` maps to but ``sigma`` lacks."""
    ts, ss = theta.sigma.target, sigma.sigma.target
    if ts.events != ss.events or ts.completions != ss.completions:
        raise WellFormednessError("theta and sigma do not share their target events")
    if theta.eta.target != sigma.eta.target:
        raise WellFormednessError("theta and sigma do not share their target action signature")
    return SMSignature(ss.events, ss.completions, ss.states | ts.states | frozenset(theta.sigma.on_states.values()))


def _retarget(m: FlatMorphism, sig: SMSignature) -> FlatMorphism:
    s = m.sigma
    return FlatMorphism(m.eta, SMMorphism(s.source, sig, s.on_events, s.on_completions, s.on_states))


def refine_check(t1: Theory, theta: FlatMorphism, sigma: FlatMorphism, t2: Theory,
                 bounds: ExplorationBounds | None = None) -> RefineVerdict:
    """Bounded check of ``t1 ~> hide(theta, translate(sigma, t2))``."""
    bounds = bounds or ExplorationBounds()
    if t2.behavioural is None:
        raise UnsupportedShape("the concrete theory must consist of one behavioural sentence")
    med = mediating_signature(theta, sigma)
    theta, sigma = _retarget(theta, med), _retarget(sigma, med)
    for m in (theta, sigma):
        problems = m.validate()
        if problems:
            raise WellFormednessError("; ".join(problems))
    if (sigma.eta.source, sigma.sigma.source) != (t2.h, t2.sig):
        raise WellFormednessError("sigma does not start at the concrete signature")
    if theta.sigma.source.events != t1.sig.events:
        raise WellFormednessError("theta does not start at the abstract signature")
    omega, model = lift_model(sigma, t2, bounds)
    if not all(action_sat(reduce_omega(theta.eta, omega), a) for a in t1.action_sentences):
        return RefineVerdict(COUNTEREXAMPLE, bounds, None, "action sentences of the abstract theory fail")
    for s in t1.sentences:
        if isinstance(s, PSMSentence):
            verdict = monitor_reduct(theta, model, s)
            if not verdict.ok:
                return RefineVerdict(COUNTEREXAMPLE, bounds, list(verdict.trace),
                                     f"{verdict.result}: {verdict.detail}")
        else:
            o1, th1 = flat_reduct(theta.eta, theta.sigma, (omega, model))
            if not sm_sat(o1, th1, s):
                w = unsat_witness(o1, th1, s)
                return RefineVerdict(COUNTEREXAMPLE, bounds, w, "reduct is not the least model")
    return RefineVerdict(REFINES, bounds)


def reduce_omega(eta: ActionMorphism, omega: ActionStructure) -> ActionStructure:
    return omega if _is_identity_eta(eta) else reduct_structure(eta, omega)


def _observe(theta: FlatMorphism, d: DeltaStep) -> DeltaStep:
    """The step as seen through ``theta``; control states are kept as they are."""
    eta, sigma = theta.eta, theta.sigma

    def conf(c: Configuration) -> Configuration:
        return Configuration(eta.reduct_valuation(c.omega), sigma.inv_pool(c.pool), c.state)

    trig = None if d.trigger is None else sigma.inv_event(d.trigger)
    return DeltaStep(conf(d.source), trig, eta.inv_messages(d.emitted), conf(d.target))


def monitor_reduct(theta: FlatMorphism, model: MachineStructure, psi: PSMSentence):
    """Protocol monitor over the observational reduct of ``model`` along ``theta``.

    Configurations of ``model`` are tracked as they are, so that distinct
    configurations never merge; each step is inspected through ``theta``.
    The returned trace consists of steps of ``model``.
    """
    start = frozenset([psi.initial])
    parent: dict = {}
    queue: deque = deque()
    for c in model.initial_configs():
        key = (c, start)
        if key not in parent:
            parent[key] = None
            queue.append(key)

    def trace_to(key, last):
        steps = [last]
        while parent[key] is not None:
            key, step = parent[key]
            steps.append(step)
        return tuple(reversed(steps))

    while queue:
        key = queue.popleft()
        c, states = key
        for c2 in model.env_successors(c):
            k2 = (c2, states)
            if k2 not in parent:
                parent[k2] = (key, {"stimulus": c2.pool.externals[0]})
                queue.append(k2)
        for d in model.outgoing(c):
            kind, val = psm_step(psi, states, _observe(theta, d))
            if kind == "error":
                return PSMVerdict("error-state-reached", trace_to(key, d), val)
            if kind == "violation":
                return PSMVerdict("violation", trace_to(key, d), val)
            k2 = (d.target, val)
            if k2 not in parent:
                parent[k2] = (key, d)
                queue.append(k2)
    return PSMVerdict("conforms")


# ------------------------------------------------------------ observations


class Observation(NamedTuple):
    kind: str  # "consume" | "emit"
    items: tuple[str, ...]

    def __str__(self) -> str:
        return f"{self.kind} {', '.join(self.items)}"

    def to_json(self):
        return {"kind": self.kind, "items": list(self.items)}


def observe_step(d: DeltaStep, visible) -> list[Observation]:
    out = []
    if d.trigger is not None and not d.trigger.completion and d.trigger.name in visible:
        out.append(Observation("consume", (str(d.trigger),)))
    emitted = sorted(str(m) for m in d.emitted if op_name(m.name) in visible)
    if emitted:
        out.append(Observation("emit", tuple(emitted)))
    return out


def observable_traces(theta: MachineStructure, visible, bounds: ExplorationBounds | None = None,
                      max_traces: int | None = None) -> frozenset[tuple[Observation, ...]]:
    """Prefix-closed set of visible observation sequences of bounded walks.

    ``visible`` is a set of event or message operation names.  Walks start
    at the initial configurations, may take environment insertions when the
    pool is empty, and take at most ``bounds.depth`` structure steps.
    """
    depth = (bounds or theta.bounds or ExplorationBounds()).depth
    visible = frozenset(visible)
    limit = max_traces if max_traces is not None else (bounds or ExplorationBounds()).cap
    seen = set()
    traces = {()}
    queue: deque = deque()
    for c in theta.initial_configs():
        key = (c, (), 0)
        if key not in seen:
            seen.add(key)
            queue.append(key)
    while queue:
        c, tr, n = queue.popleft()
        succ = [(c2, tr, n) for c2 in theta.env_successors(c)]
        if n < depth:
            for d in theta.outgoing(c):
                t2 = tr + tuple(observe_step(d, visible))
                succ.append((d.target, t2, n + 1))
        for key in succ:
            if key not in seen:
                seen.add(key)
                traces.add(key[1])
                queue.append(key)
        if len(seen) > limit:
            raise CapacityError(f"trace enumeration exceeded cap {limit}")
    closed = set()
    for t in traces:
        for i in range(len(t) + 1):
            closed.add(t[:i])
    return frozenset(closed)


def trace_shape(trace) -> tuple[str, ...]:
    """Operation names of consumed events and emitted messages, in order."""
    out = []
    for o in trace:
        for item in o.items:
            out.append(op_name(item.split("(", 1)[0]))
    return tuple(out)


def identity_morphism(t: Theory) -> FlatMorphism:
    return FlatMorphism.identity(t.h, t.sig)


__all__ = [
    "REFINES", "COUNTEREXAMPLE", "Theory", "StructuredTheory", "translate_theory", "hide_theory",
    "theory_sat", "is_model", "canonical_witness", "lift_model", "witness_models",
    "translate_flat_sentence", "RefineVerdict", "refine_check", "monitor_reduct", "mediating_signature",
    "Observation", "observe_step", "observable_traces", "trace_shape", "identity_morphism",
]
