"""Sanity checks on the random instance generators used by the property tests."""

from hypothesis import given, strategies as st

from instsm.actions import compatible
from instsm.generators import (
    incompatible_pair,
    mutate_sentence,
    random_guard,
    random_machine,
    random_machine_pair,
    random_machine_triple,
    random_pushout_span,
    rng,
    shared_action_pair,
)
from instsm.products import det_semantic

seeds = st.integers(0, 2**31)


def names(m):
    return set(m.sig.events) | set(m.sig.completions) | set(m.sig.states)


@given(seeds)
def test_reproducible(seed):
    assert random_machine(rng(seed)) == random_machine(rng(seed))
    assert random_pushout_span(rng(seed)) == random_pushout_span(rng(seed))
    assert str(random_guard(rng(seed), ["x"], 3)) == str(random_guard(rng(seed), ["x"], 3))


@given(seeds)
def test_machine_well_formed(seed):
    m = random_machine(rng(seed), "P_")
    assert m.phi.check() == []
    assert m.omega.sig == m.h
    assert m.gamma and all(w in m.h.domain.valuations() for w in m.gamma)
    assert all(n.startswith("P_") for n in names(m))


@given(seeds)
def test_deterministic_flag(seed):
    m = random_machine(rng(seed), deterministic=True)
    assert det_semantic(m.phi).holds


@given(seeds)
def test_pair_and_triple_are_disjoint(seed):
    a, b = random_machine_pair(rng(seed))
    assert not names(a) & names(b)
    assert set(a.h.actions) & set(b.h.actions) == {"skip"}
    x, y, z = random_machine_triple(rng(seed))
    assert not (names(x) & names(y)) and not (names(x) & names(z)) and not (names(y) & names(z))


@given(seeds)
def test_shared_action_pair_is_compatible(seed):
    a, b = shared_action_pair(rng(seed))
    assert "sh" in a.h.actions and "sh" in b.h.actions
    assert compatible(a.omega, b.omega)


def test_incompatible_pair():
    a, b = incompatible_pair()
    assert not compatible(a.omega, b.omega)


@given(seeds)
def test_mutation_keeps_signature(seed):
    m = random_machine(rng(seed))
    mutant = mutate_sentence(rng(seed + 1), m.phi)
    assert mutant.sig == m.sig and mutant.initial == m.phi.initial
    assert mutant.check() == []
