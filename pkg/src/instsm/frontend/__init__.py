"""Textual front end: parse ``.sm``/``.map`` sources, print them back, elaborate them."""
from .ast import Diagnostic, SourceModel
from .elaborate import Elaborated, MachineArtifact, elaborate, load, resolve_morphism
from .parser import parse, parse_file
from .printer import pretty

__all__ = ["Diagnostic", "SourceModel", "Elaborated", "MachineArtifact", "elaborate", "load",
           "resolve_morphism", "parse", "parse_file", "pretty"]
