"""
Refinement against a protocol
=============================

The ATM/bank product should implement the connector protocol.  The maps
``theta.map`` and ``sigma.map`` send the protocol and the product into a
common signature; refinement is then checked on bounded canonical models.
"""
from pathlib import Path

from instsm.frontend import load
from instsm.machines import ExplorationBounds
from instsm.refinement import Theory, refine_check

CORPUS = Path(__file__).resolve().parents[1] / "corpus"
MAPS = [str(CORPUS / "theta.map"), str(CORPUS / "sigma.map")]
bounds = ExplorationBounds(pool=3, depth=12)


def check(protocol_file):
    elab = load(str(CORPUS / "system.sm"), [str(CORPUS / protocol_file), *MAPS])
    return refine_check(Theory.of(elab.machine("psm")), elab.morphisms["theta"], elab.morphisms["sigma"],
                        Theory.of(elab.machine("system")), bounds)


# %%
# The protocol as written is implemented by the product.

v = check("psm.sm")
print(v.result)

# %%
# The mutant forgets that the bank may ask for the PIN again.  The first
# product run that does so is reported as a counterexample: environment
# stimuli interleaved with the product's steps.

v = check("psm_mutant.sm")
print(v.result, "-", v.detail)
for d in v.counterexample:
    if isinstance(d, dict):
        print(f"  env offers {d['stimulus']}")
    else:
        print(f"  {d.source.state} --{d.trigger}--> {d.target.state}")
