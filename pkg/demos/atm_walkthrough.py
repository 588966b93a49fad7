"""
ATM walk-through
================

Load the ATM machine from the corpus, fire a few events by hand and look at
what the canonical model does with each one.
"""
from pathlib import Path

from instsm.frontend import load
from instsm.guards import Valuation
from instsm.machines import Configuration, EventPool, ExplorationBounds, canonical_step, ev, materialize_canonical

CORPUS = Path(__file__).resolve().parents[1] / "corpus"
atm = load(str(CORPUS / "atm.sm")).machine("atm")

print("events:", dict(atm.sig.events))
print("states:", sorted(atm.sig.states))

# %%
# One step at a time.  A configuration is (valuation, pool, state); the
# canonical step extracts one event from the pool and fires every enabled
# transition for it, or discards the event when nothing is enabled.

def show(c):
    (d,) = canonical_step(atm.omega, atm.sentence, c)  # the ATM is deterministic
    sent = ", ".join(sorted(map(str, d.emitted))) or "-"
    print(f"  {d.trigger}: {c.state} -> {d.target.state}  sends {sent}  vars {d.target.omega}")
    return d.target

c = Configuration(Valuation({"cardId": 0, "pin": 0, "trialsNum": 0}), EventPool.of([ev("card", 1)]), "Idle")
c = show(c)
c = show(c._replace(pool=EventPool.of([ev("PIN", 7)])))
# PINEntered is a completion state: its completion event is now in the pool
c = show(c)
print("waiting in", c.state, "with pool", c.pool)

# %%
# The retry counter decides where ``reenterPIN`` leads.

for n in (1, 2, 3):
    w = Valuation({"cardId": 1, "pin": 7, "trialsNum": n})
    (d,) = canonical_step(atm.omega, atm.sentence, Configuration(w, EventPool.of([ev("reenterPIN")]), "Verifying"))
    print(f"trialsNum={n}: reenterPIN leads to {d.target.state}")

# %%
# Materializing explores every configuration reachable within the bounds,
# with the environment offering one event whenever the pool is empty.

bounds = ExplorationBounds(pool=2, depth=6)
theta = materialize_canonical(atm.omega, atm.sentence, atm.gamma, bounds)
print(f"{len(theta.delta)} steps, {len(theta.explored)} explored configurations")
