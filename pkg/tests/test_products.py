import pytest
from hypothesis import given, settings, strategies as st

from conftest import CORPUS
from instsm.actions import ActionMorphism, ActionSignature, interleave_actions, interleave_actions_shared, \
    is_deterministic, op_name
from instsm.errors import SignatureClash
from instsm.frontend import load
from instsm.generators import (
    incompatible_pair,
    random_machine,
    random_machine_pair,
    random_machine_triple,
    rng,
    shared_action_pair,
)
from instsm.guards import TRUE, Valuation
from instsm.machines import (
    CanonicalMachine,
    ExplorationBounds,
    SMMorphism,
    SMSentence,
    SMSignature,
    SMTransition,
    flat_reduct,
    materialize,
    materialize_canonical,
)
from instsm.products import (
    ProductMachine,
    associativity_witness,
    check_theorem1,
    check_theorem2,
    check_theorem4,
    commutativity_witness,
    det_delta,
    det_semantic,
    det_syntactic,
    interleave_sentences,
    interleave_structures,
    iso_check,
    product_signature,
    unit_machine,
    unit_sentence,
    unit_witness,
)

seeds = st.integers(0, 2**31)
SMALL = ExplorationBounds(pool=2, depth=6)
CORPUS_BOUNDS = ExplorationBounds(pool=3, depth=12)


@pytest.fixture(scope="module")
def system():
    return load(str(CORPUS / "system.sm"))


def canonical(art):
    return CanonicalMachine(art.omega, art.sentence, art.gamma)


def tr(src, trig, dst, guard=TRUE):
    return SMTransition(src, trig, (), guard, "skip", (), frozenset(), dst)


class TestDeterminismChecks:
    def test_atm_syntactic(self, system):
        v = det_syntactic(system.machine("atm").sentence)
        assert not v
        a, b = v.witness
        assert (a.source, a.trigger) == (b.source, b.trigger) == ("Verifying", "reenterPIN")

    def test_trivial_syntactic(self):
        assert det_syntactic(frozenset())
        assert det_syntactic(frozenset({tr("s", "e", "s")}))

    def test_atm_semantic(self, system):
        assert det_semantic(system.machine("atm").sentence)

    def test_overlapping_guards(self):
        h = ActionSignature.make(["skip"])
        sig = SMSignature.make(["e"], [], ["s", "t"])
        phi = SMSentence(h, sig, "s", frozenset({tr("s", "e", "s"), tr("s", "e", "t")}))
        v = det_semantic(phi)
        assert not v and v.kind == "semantic" and len(v.witness) == 2

    def test_semantic_sees_parameters(self, load_text):
        elab = load_text("""
            actions A { action skip2 { } }
            machine m over A { events e/1; states s, t; init s;
              transition s -e(c)[c == 0]-> s;
              transition s -e(c)[c == 1]-> t; }
        """)
        assert det_semantic(elab.machine("m").sentence)

    def test_delta_atm(self, system):
        atm = system.machine("atm")
        assert det_delta(materialize(canonical(atm), SMALL))

    def test_delta_empty(self):
        assert det_delta(materialize(unit_machine()[1], SMALL))

    def test_delta_hidden_variable(self, load_text):
        elab = load_text("""
            actions A { domain x in 0..3; domain y in 0..1; action add { x := x + y } }
            machine m over A { events go; states S; init S [x == 0]; transition S -go/add-> S; }
        """)
        m = elab.machine("m")
        theta = materialize_canonical(m.omega, m.sentence, m.gamma, SMALL)
        small = ActionSignature(m.h.actions, m.h.messages, m.h.domain.restrict({"x"}), m.h.arg_range)
        _, red = flat_reduct(ActionMorphism.inclusion(small, m.h), SMMorphism.identity(m.sig), (m.omega, theta))
        assert det_delta(theta) and not det_delta(red)


class TestDeterministicModel:
    def test_atm(self, system):
        atm = system.machine("atm")
        rep = check_theorem1(atm.omega, atm.sentence, atm.gamma, SMALL)
        assert rep.premises_hold and rep.conclusion

    def test_nondeterministic_omega_is_vacuous(self, load_text):
        elab = load_text("""
            actions A { domain x in 0..3; domain y in 0..1; action add { x := x + y } }
            machine m over A { events go; states S; init S [x == 0]; transition S -go/add-> S; }
        """)
        m = elab.machine("m")
        small = ActionSignature(m.h.actions, m.h.messages, m.h.domain.restrict({"x"}), m.h.arg_range)
        from instsm.actions import reduct_structure

        omega = reduct_structure(ActionMorphism.inclusion(small, m.h), m.omega)
        phi = SMSentence(small, m.sig, m.sentence.initial, m.sentence.transitions)
        rep = check_theorem1(omega, phi, [Valuation({"x": 0})], SMALL)
        assert not rep.premises_hold and rep.holds and rep.conclusion is False

    @given(seeds)
    def test_random(self, seed):
        m = random_machine(rng(seed), deterministic=True)
        assert check_theorem1(m.omega, m.phi, m.gamma, SMALL).holds


class TestProductSignature:
    def test_clash(self, system):
        atm = system.machine("atm")
        with pytest.raises(SignatureClash):
            product_signature(atm.h, atm.sig, atm.h, atm.sig)

    def test_states_are_pairs(self, system):
        atm, bank = system.machine("atm"), system.machine("bank")
        _, sig = product_signature(atm.h, atm.sig, bank.h, bank.sig)
        assert len(sig.states) == 5 and ("Idle", "Ready") in sig.states
        assert set(sig.events) == set(atm.sig.events) | set(bank.sig.events)


class TestInterleaveSentences:
    def test_with_empty_single_state(self):
        h = ActionSignature.make(["skip"])
        phi1 = SMSentence(h, SMSignature.make(["e"], [], ["a", "b"]), "a", frozenset({tr("a", "e", "b")}))
        phi2 = SMSentence(h, SMSignature.make(["f"], [], ["z"]), "z", frozenset())
        out = interleave_sentences(phi1, phi2)
        assert out.initial == ("a", "z")
        assert out.transitions == {tr(("a", "z"), "e", ("b", "z"))}

    def test_count(self):
        h = ActionSignature.make(["skip"])
        phi1 = SMSentence(h, SMSignature.make(["e", "e2"], [], ["a", "b"]), "a",
                          frozenset({tr("a", "e", "b"), tr("b", "e2", "a")}))
        phi2 = SMSentence(h, SMSignature.make(["f", "g", "k"], [], ["y", "z"]), "y",
                          frozenset({tr("y", "f", "z"), tr("z", "g", "y"), tr("y", "k", "y")}))
        assert len(interleave_sentences(phi1, phi2).transitions) == 10

    @given(seeds)
    def test_preserves_syntactic_determinism(self, seed):
        r = rng(seed)
        a, b = random_machine_pair(r, deterministic=True)
        if det_syntactic(a.phi) and det_syntactic(b.phi):
            assert det_syntactic(interleave_sentences(a.phi, b.phi))


@pytest.fixture(scope="module")
def product(system):
    atm, bank = system.machine("atm"), system.machine("bank")
    return interleave_structures((atm.omega, canonical(atm)), (bank.omega, canonical(bank)), CORPUS_BOUNDS)


class TestInterleaveStructures:
    def test_verify_is_internalised(self, product):
        _, theta = product
        sends = [d for d in theta.delta if d.trigger and d.trigger.name == "PINEntered"]
        assert sends
        for d in sends:
            assert not d.emitted
            assert any(e.name == "verify" for e in d.target.pool.externals)
        assert any(d.trigger.name == "verify" for d in theta.delta if d.trigger)

    def test_user_messages_stay_visible(self, product):
        _, theta = product
        names = {m.name for d in theta.delta for m in d.emitted}
        assert "user.ejectCard" in names
        assert all(op_name(n) not in theta.sig.events for n in names)

    def test_routing(self, product):
        _, theta = product
        for d in theta.delta:
            assert not any(theta.sig.events.get(op_name(m.name)) == len(m.args) for m in d.emitted)

    def test_frame(self, product, system):
        _, theta = product
        atm, bank = system.machine("atm"), system.machine("bank")
        for d in theta.delta:
            side = 0 if d.trigger.completion or d.trigger.name in atm.sig.events else 1
            other_vars = bank.h.vars if side == 0 else atm.h.vars
            assert d.source.state[1 - side] == d.target.state[1 - side]
            assert all(d.source.omega[v] == d.target.omega[v] for v in other_vars)

    def test_product_with_unit(self, system):
        atm = canonical(system.machine("atm"))
        au = materialize(ProductMachine(atm, unit_machine()[1]), SMALL)
        assert iso_check(au, materialize(atm, SMALL), unit_witness)


class TestProductSatisfaction:
    def test_corpus(self, system):
        atm, bank = system.machine("atm"), system.machine("bank")
        rep = check_theorem2((atm.omega, atm.sentence, atm.gamma), (bank.omega, bank.sentence, bank.gamma),
                             CORPUS_BOUNDS)
        assert rep.premises_hold and rep.conclusion

    def test_unit_side(self, system):
        atm = system.machine("atm")
        omega, m = unit_machine()
        rep = check_theorem2((atm.omega, atm.sentence, atm.gamma), (omega, unit_sentence(), m.gamma()), SMALL)
        assert rep.premises_hold and rep.conclusion

    @given(seeds)
    def test_random(self, seed):
        a, b = random_machine_pair(rng(seed))
        rep = check_theorem2(a.triple(), b.triple(), SMALL)
        assert rep.premises_hold and rep.conclusion


class TestMonoidLaws:
    def test_identity(self, system):
        theta = materialize(canonical(system.machine("bank")), SMALL)
        assert iso_check(theta, theta, lambda s: s)

    def test_unit_unit(self):
        # states must be disjoint, so the second copy gets its own state name
        omega, u = unit_machine()
        other = CanonicalMachine(omega, SMSentence(omega.sig, SMSignature.make(states=["u"]), "u", frozenset()),
                                 [Valuation()], stimuli=())
        uu = materialize(ProductMachine(u, other), SMALL)
        assert iso_check(uu, materialize(u, SMALL), unit_witness)

    def test_wrong_bijection(self, system):
        atm, bank = canonical(system.machine("atm")), canonical(system.machine("bank"))
        ab = materialize(ProductMachine(atm, bank), SMALL)
        assert not iso_check(ab, ab, commutativity_witness)

    @settings(max_examples=20)
    @given(seeds)
    def test_random_triples(self, seed):
        a, b, c = (CanonicalMachine(*x.triple()) for x in random_machine_triple(rng(seed)))
        assert iso_check(materialize(ProductMachine(a, b), SMALL), materialize(ProductMachine(b, a), SMALL),
                         commutativity_witness)
        assert iso_check(materialize(ProductMachine(ProductMachine(a, b), c), SMALL),
                         materialize(ProductMachine(a, ProductMachine(b, c)), SMALL), associativity_witness)


class TestProductDeterminism:
    def test_corpus(self, system):
        atm, bank = system.machine("atm"), system.machine("bank")
        rep = check_theorem4((atm.omega, canonical(atm)), (bank.omega, canonical(bank)), CORPUS_BOUNDS)
        assert rep.premises_hold and rep.conclusion

    def test_incompatible_rejected(self):
        a, b = incompatible_pair()
        rep = check_theorem4((a.omega, CanonicalMachine(*a.triple())), (b.omega, CanonicalMachine(*b.triple())),
                             SMALL)
        assert not rep.premises["compatible"] and rep.conclusion is None
        assert "precondition" in rep.detail

    def test_unit_side(self, system):
        bank = system.machine("bank")
        omega, m = unit_machine()
        rep = check_theorem4((bank.omega, canonical(bank)), (omega, m), SMALL)
        assert rep.premises_hold and rep.conclusion

    @given(seeds)
    def test_disjoint_random_pairs(self, seed):
        # only skip is shared, and skip has no effects
        a, b = random_machine_pair(rng(seed), deterministic=True)
        rep = check_theorem4((a.omega, CanonicalMachine(*a.triple())), (b.omega, CanonicalMachine(*b.triple())),
                             SMALL)
        assert rep.holds

    @given(seeds)
    def test_united_shared_actions_stay_deterministic(self, seed):
        a, b = shared_action_pair(rng(seed))
        assert is_deterministic(a.omega) and is_deterministic(b.omega)
        assert is_deterministic(interleave_actions_shared(a.omega, b.omega))

    def test_plain_interleaving_splits_shared_actions(self, load_text):
        elab = load_text("""
            actions L { domain g in 0..1; domain x in 0..1; action sh { g := 1; x := 1 } }
            actions R { domain g in 0..1; domain y in 0..1; action sh { g := 1; y := 1 } }
        """)
        left, right = elab.actions["L"].omega, elab.actions["R"].omega
        from instsm.actions import compatible

        assert compatible(left, right)
        assert not is_deterministic(interleave_actions(left, right))
        assert is_deterministic(interleave_actions_shared(left, right))
