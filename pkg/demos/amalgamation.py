"""
Amalgamating action structures
==============================

Two action blocks that agree on what they share can be glued into one
structure over the pushout signature.  Reducing the result back along
either leg gives the original block unchanged.
"""
from pathlib import Path

from instsm.actions import ActionMorphism, amalgamate, check_amalgamation, pushout_action_sigs
from instsm.errors import AmalgamationError
from instsm.frontend import load

CORPUS = Path(__file__).resolve().parents[1] / "corpus"
elab = load(str(CORPUS / "system.sm"))


def glue(a1, a2):
    apex = a1.sig.intersection(a2.sig)
    span = (ActionMorphism.inclusion(apex, a1.sig), ActionMorphism.inclusion(apex, a2.sig))
    hr, t1, t2 = pushout_action_sigs(*span)
    print(f"apex: {sorted(apex.actions)} / vars {sorted(apex.vars)}")
    print(f"pushout: {len(hr.actions)} actions, {len(hr.messages)} messages, {len(hr.vars)} vars")
    joint = amalgamate(t1, t2, a1.omega, a2.omega, span=span)
    print("reducts recover the inputs:", check_amalgamation(t1, t2, a1.omega, a2.omega, joint))
    return joint


# %%
# The ATM and bank action blocks share only ``skip``.

joint = glue(elab.actions["ATM"], elab.actions["BANK"])
print(len(joint.transitions), "transitions")

# %%
# Blocks that disagree on the shared part are refused.

bad = load(str(CORPUS.parent / "demos" / "disagree.sm"))
try:
    glue(bad.actions["L"], bad.actions["R"])
except AmalgamationError as exc:
    print("rejected:", exc)
