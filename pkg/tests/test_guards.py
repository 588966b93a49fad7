import pytest
from hypothesis import given, strategies as st

from instsm.errors import CapacityError, InstsmError, WellFormednessError
from instsm.generators import random_domain, random_guard, random_guard_instance, random_valuation, rng
from instsm.guards import (
    FALSE,
    TRUE,
    GuardMorphism,
    GuardSignature,
    Not,
    Valuation,
    ValueDomain,
    disjointness_witness,
    eval_guard,
    guard_reduct,
    guards_disjoint,
    parse_guard,
    translate_guard,
)

seeds = st.integers(0, 2**31)


def morphism(src, tgt, mapping):
    return GuardMorphism(GuardSignature(frozenset(src)), GuardSignature(frozenset(tgt)), mapping)


class TestEval:
    def test_true(self):
        assert eval_guard(TRUE, Valuation({"x": 4}))

    def test_hand_truth_table(self):
        g = parse_guard("trialsNum == 0 and trialsNum < 3")
        assert not eval_guard(g, Valuation({"trialsNum": 1}))
        assert eval_guard(g, Valuation({"trialsNum": 0}))

    def test_precedence(self):
        # not binds tighter than and, and tighter than or
        g = parse_guard("not x == 1 and x < 3 or x == 5")
        got = [x for x in range(7) if eval_guard(g, {"x": x})]
        assert got == [0, 2, 5]

    def test_parentheses(self):
        g = parse_guard("not (x == 1 or x == 2)")
        assert [x for x in range(4) if eval_guard(g, {"x": x})] == [0, 3]

    def test_negative_literal_and_variable_comparison(self):
        g = parse_guard("x >= -1 and x != y")
        assert eval_guard(g, {"x": 0, "y": 1})
        assert not eval_guard(g, {"x": 1, "y": 1})

    @pytest.mark.parametrize("bad", ["x <", "x < 3 3", "and", "x === 1", "(x < 1"])
    def test_parse_errors(self, bad):
        with pytest.raises(InstsmError):
            parse_guard(bad)


class TestTranslateAndReduct:
    def test_rename(self):
        v = morphism({"x"}, {"y"}, {"x": "y"})
        assert translate_guard(v, parse_guard("x < 3")) == parse_guard("y < 3")

    def test_identity(self):
        g = parse_guard("x < 3 or not y == 1")
        v = GuardMorphism.identity(GuardSignature(frozenset({"x", "y"})))
        assert translate_guard(v, g) == g

    def test_merge_makes_tautology(self):
        v = morphism({"x", "y"}, {"z"}, {"x": "z", "y": "z"})
        assert translate_guard(v, parse_guard("x == y")) == parse_guard("z == z")

    def test_reduct_by_hand(self):
        assert guard_reduct(morphism({"x"}, {"y"}, {"x": "y"}), {"y": 5}) == Valuation({"x": 5})
        v = morphism({"x", "y"}, {"z", "w"}, {"x": "z", "y": "z"})
        assert guard_reduct(v, {"z": 7, "w": 1}) == Valuation({"x": 7, "y": 7})

    def test_undeclared_variable_rejected(self):
        with pytest.raises(WellFormednessError):
            translate_guard(morphism({"x"}, {"y"}, {"x": "y"}), parse_guard("q < 1"))

    def test_partial_morphism_rejected(self):
        with pytest.raises(WellFormednessError):
            morphism({"x", "y"}, {"z"}, {"x": "z"})

    @given(seeds)
    def test_satisfaction_condition(self, seed):
        v, g, omega = random_guard_instance(rng(seed))
        assert eval_guard(translate_guard(v, g), omega) == eval_guard(g, guard_reduct(v, omega))

    @given(seeds)
    def test_composition(self, seed):
        r = rng(seed)
        g = random_guard(r, ["a", "b"])
        v1 = morphism({"a", "b"}, {"c", "d"}, {"a": r.choice("cd"), "b": r.choice("cd")})
        v2 = morphism({"c", "d"}, {"e"}, {"c": "e", "d": "e"})
        assert translate_guard(v1.then(v2), g) == translate_guard(v2, translate_guard(v1, g))


class TestDisjoint:
    def test_junction_split(self):
        dom = ValueDomain.of(trialsNum=(0, 5))
        assert guards_disjoint(parse_guard("trialsNum < 3"), parse_guard("trialsNum >= 3"), dom)

    def test_false_is_disjoint_from_anything(self):
        assert guards_disjoint(parse_guard("x < 3"), FALSE, ValueDomain.of(x=(0, 5)))

    def test_overlap_witness(self):
        dom = ValueDomain.of(x=(0, 5))
        g1, g2 = parse_guard("x < 3"), parse_guard("x == 2")
        assert not guards_disjoint(g1, g2, dom)
        assert disjointness_witness(g1, g2, dom) == Valuation({"x": 2})

    def test_cap(self):
        dom = ValueDomain.of(x=(0, 99), y=(0, 99))
        with pytest.raises(CapacityError):
            guards_disjoint(TRUE, TRUE, dom, cap=1000)

    @given(seeds)
    def test_symmetric_and_complement(self, seed):
        r = rng(seed)
        dom = random_domain(r, ["x", "y"])
        g1, g2 = random_guard(r, ["x", "y"]), random_guard(r, ["x", "y"])
        assert guards_disjoint(g1, g2, dom) == guards_disjoint(g2, g1, dom)
        assert guards_disjoint(g1, Not(g1), dom)


class TestValuation:
    def test_hashable_and_ordered(self):
        a, b = Valuation({"y": 1, "x": 0}), Valuation([("x", 0), ("y", 1)])
        assert a == b and hash(a) == hash(b)
        assert list(a) == ["x", "y"]

    def test_domain_enumeration_order(self):
        vals = ValueDomain.of(b=(0, 1), a=(0, 1)).valuations()
        assert [tuple(v.values()) for v in vals] == [(0, 0), (0, 1), (1, 0), (1, 1)]

    def test_empty_range_rejected(self):
        with pytest.raises(WellFormednessError):
            ValueDomain.of(x=(2, 1))

    @given(seeds)
    def test_random_valuation_in_domain(self, seed):
        r = rng(seed)
        dom = random_domain(r, ["x", "y"])
        assert dom.contains(random_valuation(r, dom))
