import pytest
from hypothesis import given, strategies as st

from instsm.actions import (
    SKIP,
    SKIP_PROGRAM,
    ActionMorphism,
    ActionProgram,
    ActionSentence,
    ActionSignature,
    ActionStructure,
    ActionTransition,
    Assign,
    Send,
    act,
    action_sat,
    amalgamate,
    check_amalgamation,
    compatible,
    exec_program,
    interleave_actions,
    interleave_actions_shared,
    is_deterministic,
    materialize_structure,
    msg,
    op_name,
    parse_instance,
    pushout_action_sigs,
    reduct_structure,
    translate_sentence,
    translate_structure,
)
from instsm.errors import AmalgamationError, BindingError, CapacityError, RangeError, WellFormednessError
from instsm.generators import (
    random_action_morphism,
    random_action_sentence,
    random_action_signature,
    random_action_structure,
    random_pushout_span,
    rng,
)
from instsm.guards import FALSE, TRUE, Valuation, ValueDomain, parse_guard, parse_int

seeds = st.integers(0, 2**31)


def prog(*stmts, params=()):
    out = []
    for s in stmts:
        if s.startswith("send "):
            name, args = parse_call(s[5:])
            out.append(Send(name, args))
        else:
            var, expr = s.split(":=")
            out.append(Assign(var.strip(), parse_int(expr)))
    return ActionProgram(tuple(params), tuple(out))


def parse_call(text):
    name, rest = text.split("(", 1)
    inner = rest.rstrip(")").strip()
    return name.strip(), tuple(parse_int(a) for a in inner.split(",")) if inner else ()


def structure(domain, actions, messages=(), arg_range=(0, 1)):
    """Materialize ``actions`` (name -> program) over ``domain``."""
    sig = ActionSignature.make({a: len(p.params) for a, p in actions.items()}, messages, domain, arg_range)
    return materialize_structure(sig, actions)


EJECT = prog("send user.ejectCard()", "trialsNum := 0")
INC = prog("trialsNum := trialsNum + 1")


class TestExec:
    def test_eject_reset(self):
        sent, after = exec_program(EJECT, Valuation({"trialsNum": 2, "cardId": 5}))
        assert sent == {msg("user.ejectCard")}
        assert after == Valuation({"trialsNum": 0, "cardId": 5})

    def test_empty_program(self):
        w = Valuation({"x": 1})
        assert exec_program(SKIP_PROGRAM, w) == (frozenset(), w)

    def test_increment(self):
        assert exec_program(INC, Valuation({"trialsNum": 1})) == (frozenset(), Valuation({"trialsNum": 2}))

    def test_sequential_left_to_right(self):
        p = prog("x := x + 1", "send m(x)", "x := x * 2")
        assert exec_program(p, Valuation({"x": 1})) == ({msg("m", 2)}, Valuation({"x": 4}))

    def test_range_error(self):
        sig = ActionSignature.make(["inc"], (), {"trialsNum": (0, 3)})
        with pytest.raises(RangeError):
            exec_program(INC, Valuation({"trialsNum": 3}), sig=sig)

    def test_message_argument_range(self):
        sig = ActionSignature.make(["s"], {"m": 1}, {"x": (0, 3)}, arg_range=(0, 1))
        with pytest.raises(RangeError):
            exec_program(prog("send m(x)"), Valuation({"x": 2}), sig=sig)

    def test_unbound_parameter(self):
        with pytest.raises(BindingError):
            exec_program(prog("x := c", params=("c",)), Valuation({"x": 0}))

    def test_binding(self):
        p = prog("x := c", params=("c",))
        assert exec_program(p, Valuation({"x": 0}), {"c": 1})[1] == Valuation({"x": 1})


class TestMaterialize:
    def test_increment_aborts_at_top(self):
        omega = structure({"trialsNum": (0, 3)}, {"inc": INC})
        assert sorted(t.omega["trialsNum"] for t in omega.transitions) == [0, 1, 2]
        assert all(t.omega_prime["trialsNum"] == t.omega["trialsNum"] + 1 for t in omega.transitions)

    def test_skip_without_variables(self):
        omega = structure({}, {SKIP: SKIP_PROGRAM})
        assert omega.transitions == {ActionTransition(Valuation(), act(SKIP), frozenset(), Valuation())}

    def test_eject_everywhere(self):
        omega = structure({"trialsNum": (0, 3), "cardId": (0, 2)}, {"eject": EJECT}, ["user.ejectCard"])
        assert len(omega) == 12
        assert all(t.omega_prime["trialsNum"] == 0 and t.msgs == {msg("user.ejectCard")}
                   for t in omega.transitions)

    def test_parameter_instances(self):
        omega = structure({"x": (0, 2)}, {"set": prog("x := c", params=("c",))}, arg_range=(0, 2))
        assert len(omega) == 9
        assert is_deterministic(omega)

    def test_missing_program(self):
        sig = ActionSignature.make(["a", "b"], (), {"x": (0, 1)})
        with pytest.raises(WellFormednessError):
            materialize_structure(sig, {"a": SKIP_PROGRAM})

    def test_cap(self):
        sig = ActionSignature.make(["a"], (), {"x": (0, 99), "y": (0, 99)})
        with pytest.raises(CapacityError):
            materialize_structure(sig, {"a": SKIP_PROGRAM}, cap=100)

    @given(seeds)
    def test_always_deterministic(self, seed):
        r = rng(seed)
        sig, defs = random_action_signature(r)
        assert is_deterministic(materialize_structure(sig, defs)).holds


def plus_fixture():
    """``x := x + y`` over x in 0..3 and y in 0..1, plus the inclusion of ``{x}``."""
    omega = structure({"x": (0, 3), "y": (0, 1)}, {"add": prog("x := x + y")})
    small = ActionSignature.make(["add"], (), {"x": (0, 3)})
    return omega, ActionMorphism.inclusion(small, omega.sig)


class TestReduct:
    def test_identity(self):
        omega, _ = plus_fixture()
        assert reduct_structure(ActionMorphism.identity(omega.sig), omega) == omega

    def test_hiding_introduces_nondeterminism(self):
        omega, eta = plus_fixture()
        assert is_deterministic(omega).holds
        red = reduct_structure(eta, omega)
        outcomes = {t.omega_prime for t in red.outcomes(Valuation({"x": 0}), act("add"))}
        assert outcomes == {Valuation({"x": 0}), Valuation({"x": 1})}
        v = is_deterministic(red)
        assert not v.holds and len(v.witness) == 2
        a, b = v.witness
        assert (a.omega, a.action) == (b.omega, b.action) and a != b

    def test_unmapped_messages_disappear(self):
        omega = structure({}, {"go": prog("send out()")}, ["out"])
        small = ActionSignature.make(["go"])
        red = reduct_structure(ActionMorphism.inclusion(small, omega.sig), omega)
        assert [t.msgs for t in red.transitions] == [frozenset()]

    @given(seeds)
    def test_functoriality(self, seed):
        r = rng(seed)
        sig, defs = random_action_signature(r)
        eta1 = random_action_morphism(r, sig, "s")
        eta2 = random_action_morphism(r, eta1.target, "t")
        omega2 = random_action_structure(r, eta2.target, noise=2)
        direct = reduct_structure(eta1.then(eta2), omega2)
        stepwise = reduct_structure(eta1, reduct_structure(eta2, omega2))
        assert direct.transitions == stepwise.transitions
        assert reduct_structure(ActionMorphism.identity(eta2.target), omega2) == omega2


class TestTranslateStructure:
    def test_identity(self):
        omega, _ = plus_fixture()
        assert translate_structure(ActionMorphism.identity(omega.sig), omega).transitions == omega.transitions

    def test_fresh_variable_replicates(self):
        omega = structure({"x": (0, 1)}, {"flip": prog("x := 1 - x")})
        big = ActionSignature.make(["flip"], (), {"x": (0, 1), "z": (0, 2)})
        out = translate_structure(ActionMorphism.inclusion(omega.sig, big), omega)
        assert len(out) == len(omega) * 3 * 3
        for t in omega.transitions:
            for z1 in range(3):
                for z2 in range(3):
                    w1, w2 = t.omega.update({"z": z1}), t.omega_prime.update({"z": z2})
                    assert ActionTransition(w1, t.action, t.msgs, w2) in out.transitions

    @given(seeds)
    def test_reduct_of_translation_contains_source(self, seed):
        r = rng(seed)
        sig, defs = random_action_signature(r, max_vars=1, max_msgs=1)
        omega = materialize_structure(sig, defs)
        eta = ActionMorphism.inclusion(sig, ActionSignature(
            sig.actions, sig.messages, sig.domain.union(ValueDomain.of(fresh=(0, 1))), sig.arg_range))
        back = reduct_structure(eta, translate_structure(eta, omega))
        assert omega.transitions <= back.transitions


class TestSentences:
    def test_eject_sentence(self):
        omega = structure({"trialsNum": (0, 3)}, {"eject": EJECT}, ["user.ejectCard"])
        phi = ActionSentence(TRUE, act("eject"), frozenset({msg("user.ejectCard")}), parse_guard("trialsNum == 0"))
        assert action_sat(omega, phi)

    def test_vacuous(self):
        omega = structure({"trialsNum": (0, 3)}, {"inc": INC})
        assert action_sat(omega, ActionSentence(FALSE, act("inc"), frozenset(), FALSE))

    def test_wrong_post(self):
        omega = structure({"trialsNum": (0, 3)}, {"inc": INC})
        phi = ActionSentence(parse_guard("trialsNum == 1"), act("inc"), frozenset(), parse_guard("trialsNum == 3"))
        assert not action_sat(omega, phi)

    def test_messages_are_a_lower_bound(self):
        omega = structure({}, {"go": prog("send a()", "send b()")}, ["a", "b"])
        assert action_sat(omega, ActionSentence(TRUE, act("go"), frozenset({msg("a")}), TRUE))

    def test_translate(self):
        src = ActionSignature.make(["a"], {"m": 1}, {"x": (0, 2)})
        tgt = ActionSignature.make(["b"], {"n": 1}, {"y": (0, 2)})
        eta = ActionMorphism(src, tgt, {"a": "b"}, {"m": "n"}, {"x": "y"})
        phi = ActionSentence(parse_guard("x < 1"), act("a"), frozenset({msg("m", 0)}), parse_guard("x < 2"))
        out = translate_sentence(eta, phi)
        assert out == ActionSentence(parse_guard("y < 1"), act("b"), frozenset({msg("n", 0)}), parse_guard("y < 2"))
        assert translate_sentence(ActionMorphism.identity(src), phi) == phi

    @given(seeds)
    def test_satisfaction_condition(self, seed):
        r = rng(seed)
        sig, _ = random_action_signature(r)
        eta = random_action_morphism(r, sig)
        target = random_action_structure(r, eta.target, noise=3)
        phi = random_action_sentence(r, sig)
        assert action_sat(reduct_structure(eta, target), phi) == action_sat(target, translate_sentence(eta, phi))


class TestDeterminism:
    def test_message_choice(self):
        w = Valuation()
        sig = ActionSignature.make(["a"], ["m"])
        omega = ActionStructure(sig, frozenset({
            ActionTransition(w, act("a"), frozenset(), w),
            ActionTransition(w, act("a"), frozenset({msg("m")}), w),
        }))
        v = is_deterministic(omega)
        assert not v and v.kind == "action"


def one_var(action_body, var="g", hi=1, name="a", messages=()):
    return structure({var: (0, hi)}, {name: prog(*action_body)}, messages)


class TestCompatibility:
    def test_disjoint(self):
        assert compatible(one_var(["x := 0"], "x", name="p"), one_var(["y := 1"], "y", name="q"))

    def test_equal(self):
        o = one_var(["g := 1 - g"])
        assert compatible(o, o)

    def test_shared_action_disagrees(self):
        assert not compatible(one_var(["g := 0"]), one_var(["g := 1"]))


class TestInterleave:
    def test_unit(self):
        o = one_var(["g := 1 - g"])
        unit = ActionStructure(ActionSignature.make(), frozenset())
        assert interleave_actions(o, unit).transitions == o.transitions

    def test_disjoint_count(self):
        o1 = structure({"x": (0, 2)}, {"p": prog("x := 0")})
        o2 = structure({"y": (0, 1)}, {"q": prog("y := 1 - y")})
        prod = interleave_actions(o1, o2)
        assert len(prod) == 2 * len(o1) + 3 * len(o2)

    def test_frame_condition(self):
        o1 = structure({"g": (0, 1), "x": (0, 1)}, {"p": prog("g := 1")})
        o2 = structure({"g": (0, 1), "y": (0, 1)}, {"q": prog("g := 0")})
        prod = interleave_actions(o1, o2)
        for t in prod.transitions:
            untouched = "y" if t.action.name == "p" else "x"
            assert t.omega[untouched] == t.omega_prime[untouched]

    def test_shared_action_fires_per_side(self):
        o1 = one_var(["g := g", "send m1()"], messages=["m1"])
        o2 = one_var(["g := g", "send m2()"], messages=["m2"])
        plain = interleave_actions(o1, o2)
        assert {t.msgs for t in plain.outcomes(Valuation({"g": 0}), act("a"))} == {
            frozenset({msg("m1")}), frozenset({msg("m2")})}
        assert not is_deterministic(plain)

    def test_shared_version_unites_messages(self):
        o1 = one_var(["g := g", "send m1()"], messages=["m1"])
        o2 = one_var(["g := g", "send m2()"], messages=["m2"])
        joint = interleave_actions_shared(o1, o2)
        assert [t.msgs for t in joint.outcomes(Valuation({"g": 0}), act("a"))] == [
            frozenset({msg("m1"), msg("m2")})]
        assert is_deterministic(joint)

    def test_shared_version_incompatible_effects(self):
        joint = interleave_actions_shared(one_var(["g := 0"]), one_var(["g := 1"]))
        assert len(joint) == 0

    @given(seeds)
    def test_shared_version_without_shared_actions(self, seed):
        r = rng(seed)
        s1, d1 = random_action_signature(r, "L", max_vars=1)
        s2, d2 = random_action_signature(r, "R", max_vars=1)
        o1, o2 = materialize_structure(s1, d1), materialize_structure(s2, d2)
        assert interleave_actions_shared(o1, o2).transitions == interleave_actions(o1, o2).transitions

    @given(seeds)
    def test_commutative_and_associative(self, seed):
        r = rng(seed)
        o = [materialize_structure(*random_action_signature(r, p, max_vars=1)) for p in "ABC"]
        assert interleave_actions(o[0], o[1]).transitions == interleave_actions(o[1], o[0]).transitions
        left = interleave_actions(interleave_actions(o[0], o[1]), o[2])
        right = interleave_actions(o[0], interleave_actions(o[1], o[2]))
        assert left.transitions == right.transitions

    def test_cap(self):
        o1 = structure({"x": (0, 30)}, {"p": prog("x := x")})
        o2 = structure({"y": (0, 30)}, {"q": prog("y := y")})
        with pytest.raises(CapacityError):
            interleave_actions(o1, o2, cap=100)


class TestPushout:
    def test_identities(self):
        h = ActionSignature.make(["a"], ["m"], {"x": (0, 1)})
        ident = ActionMorphism.identity(h)
        hr, t1, t2 = pushout_action_sigs(ident, ident)
        assert hr == h and t1 == t2

    def test_empty_apex_is_disjoint_union(self):
        h1 = ActionSignature.make(["a"], ["m"], {"x": (0, 1)})
        h2 = ActionSignature.make(["a"], ["n"], {"y": (0, 2)})
        apex = ActionSignature.make()
        hr, t1, t2 = pushout_action_sigs(ActionMorphism.inclusion(apex, h1), ActionMorphism.inclusion(apex, h2))
        assert len(hr.actions) == 2 and len(hr.messages) == 2 and len(hr.vars) == 2
        assert t1.is_injective() and t2.is_injective()
        assert t1.on_actions["a"] != t2.on_actions["a"]

    def test_glues_images(self):
        apex = ActionSignature.make((), (), {"v": (0, 1)})
        h1 = ActionSignature.make((), (), {"x": (0, 1)})
        h2 = ActionSignature.make((), (), {"y": (0, 1)})
        e1 = ActionMorphism(apex, h1, {}, {}, {"v": "x"})
        e2 = ActionMorphism(apex, h2, {}, {}, {"v": "y"})
        hr, t1, t2 = pushout_action_sigs(e1, e2)
        assert len(hr.vars) == 1 and t1.on_vars["x"] == t2.on_vars["y"]
        assert e1.then(t1) == e2.then(t2)


class TestAmalgamation:
    def test_identity_span(self):
        o = one_var(["g := 1 - g"])
        ident = ActionMorphism.identity(o.sig)
        _, t1, t2 = pushout_action_sigs(ident, ident)
        assert amalgamate(t1, t2, o, o, span=(ident, ident)).transitions == o.transitions

    def test_disjoint(self):
        o1 = structure({"x": (0, 1)}, {"p": prog("x := 1 - x")})
        o2 = structure({"y": (0, 2)}, {"q": prog("y := 0")})
        apex = ActionSignature.make()
        span = (ActionMorphism.inclusion(apex, o1.sig), ActionMorphism.inclusion(apex, o2.sig))
        _, t1, t2 = pushout_action_sigs(*span)
        joint = amalgamate(t1, t2, o1, o2, span=span)
        assert check_amalgamation(t1, t2, o1, o2, joint) == (True, True)

    def test_incompatible_rejected(self):
        o1, o2 = one_var(["g := 0"]), one_var(["g := 1"])
        apex = ActionSignature.make(["a"], (), {"g": (0, 1)})
        span = (ActionMorphism.inclusion(apex, o1.sig), ActionMorphism.inclusion(apex, o2.sig))
        _, t1, t2 = pushout_action_sigs(*span)
        with pytest.raises(AmalgamationError):
            amalgamate(t1, t2, o1, o2, span=span)

    def test_non_injective_messages_rejected(self):
        src = ActionSignature.make((), ["m", "n"])
        tgt = ActionSignature.make((), ["k"])
        theta = ActionMorphism(src, tgt, {}, {"m": "k", "n": "k"}, {})
        o = ActionStructure(src, frozenset())
        with pytest.raises(AmalgamationError):
            amalgamate(theta, theta, o, o)

    @given(seeds)
    def test_generated_squares(self, seed):
        sq = random_pushout_span(rng(seed))
        assert compatible(sq.omega1, sq.omega2)
        _, t1, t2 = pushout_action_sigs(*sq.span)
        joint = amalgamate(t1, t2, sq.omega1, sq.omega2, span=sq.span)
        assert check_amalgamation(t1, t2, sq.omega1, sq.omega2, joint) == (True, True)


class TestNames:
    def test_op_name(self):
        assert op_name("bank.verify") == "verify" and op_name("verify") == "verify"

    @pytest.mark.parametrize("text,expected", [
        ("card(1)", ("card", (1,))), ("verify(0, 1)", ("verify", (0, 1))),
        ("reenterPIN", ("reenterPIN", ())), ("ping()", ("ping", ())),
    ])
    def test_parse_instance(self, text, expected):
        assert parse_instance(text) == expected

    def test_structure_json_is_sorted(self):
        o = structure({"x": (0, 2)}, {"p": prog("x := 0")})
        rows = o.to_json()
        assert rows == sorted(rows, key=lambda r: (r["omega"]["x"],))
        assert rows[0] == {"omega": {"x": 0}, "action": "p()", "msgs": [], "omega_prime": {"x": 0}}
