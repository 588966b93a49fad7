"""instsm: institutions for flat UML behavioural and protocol state machines.

Submodules
----------
guards       variables, valuations, guard expressions and their translation
actions      action signatures, structures, sentences, reducts, amalgamation
machines     machine signatures, sentences, canonical models and monitors
products     interleaving products, determinism checks, unit machine
refinement   structured theories and bounded refinement checking
frontend     parser, printer and elaborator for ``.sm`` files
generators   seeded random instances used by the property suites
cli          the ``instsm`` command
"""
from . import actions, frontend, generators, guards, machines, products, refinement
from .actions import ActionMorphism, ActionSentence, ActionSignature, ActionStructure, materialize_structure
from .errors import (
    AmalgamationError,
    BindingError,
    CapacityError,
    DSLError,
    InstsmError,
    PoolCapacityError,
    RangeError,
    SignatureClash,
    UnsupportedShape,
    WellFormednessError,
)
from .guards import GuardMorphism, GuardSignature, Valuation, ValueDomain, eval_guard, parse_guard
from .machines import (
    CanonicalMachine,
    ExplorationBounds,
    FlatMorphism,
    MachineStructure,
    PSMSentence,
    SMMorphism,
    SMSentence,
    SMSignature,
    materialize,
    materialize_canonical,
    psm_check,
    sm_sat,
)
from .products import ProductMachine, det_delta, det_semantic, det_syntactic, iso_check
from .refinement import Theory, observable_traces, refine_check

__version__ = "0.1.0"
