"""
Products and determinism
========================

Put the ATM and the bank side by side, check the determinism notions on the
ATM, and see why shared actions need the synchronising interleaving.
"""
from pathlib import Path

from instsm.actions import compatible, interleave_actions, interleave_actions_shared, is_deterministic
from instsm.frontend import load
from instsm.machines import CanonicalMachine, ExplorationBounds, sm_sat
from instsm.products import det_delta, det_semantic, det_syntactic, interleave_sentences, interleave_structures

CORPUS = Path(__file__).resolve().parents[1] / "corpus"
system = load(str(CORPUS / "system.sm"))
atm, bank = system.machine("atm"), system.machine("bank")
bounds = ExplorationBounds(pool=3, depth=12)

# %%
# Two transitions leave ``Verifying`` on ``reenterPIN``, so the ATM is not
# syntactically deterministic.  Their guards are disjoint, so it is
# semantically deterministic, and so is its canonical model.

print("syntactic:", det_syntactic(atm.sentence).holds)
print("semantic: ", det_semantic(atm.sentence).holds)

# %%
# The product of the two canonical models.  ``bank.verify`` and the bank's
# replies are events of the other side, so they travel through the shared
# pool instead of being emitted.

product = interleave_structures((atm.omega, CanonicalMachine(atm.omega, atm.sentence, atm.gamma)),
                                (bank.omega, CanonicalMachine(bank.omega, bank.sentence, bank.gamma)), bounds)
omega, theta = product
print(f"product: {len(theta.delta)} steps, deterministic: {det_delta(theta).holds}")
visible = sorted({str(m) for d in theta.delta for m in d.emitted})
print("visible emissions:", visible)

# %%
# The product of the models satisfies the product of the sentences.

phi = interleave_sentences(atm.sentence, bank.sentence)
print("product sentence has", len(phi.transitions), "transitions; satisfied:", sm_sat(omega, theta, phi))

# %%
# Shared actions.  Both sides set the shared ``g`` but also touch a private
# variable.  The plain interleaving keeps both versions of ``sh`` and so
# becomes nondeterministic; the synchronising one fires them together.

elab = load(str(CORPUS.parent / "demos" / "shared_action.sm"))
left, right = elab.actions["L"].omega, elab.actions["R"].omega
print("compatible:", compatible(left, right))
print("plain interleaving deterministic:        ", is_deterministic(interleave_actions(left, right)).holds)
print("synchronising interleaving deterministic:", is_deterministic(interleave_actions_shared(left, right)).holds)
