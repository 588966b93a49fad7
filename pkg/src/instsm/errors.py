"""Exception hierarchy shared by all layers."""


class InstsmError(Exception):
    """Base class for every error raised by this package."""


class WellFormednessError(InstsmError):
    """A value refers to names outside its signature or breaks an invariant."""


class CapacityError(InstsmError):
    """An enumeration would exceed the configured cap."""


class RangeError(InstsmError):
    """A computed value falls outside its declared finite domain."""


class BindingError(InstsmError):
    """A program refers to a parameter that the binding does not supply."""


class PoolCapacityError(CapacityError):
    """An event pool would grow beyond its bound."""


class AmalgamationError(InstsmError):
    """Preconditions of model amalgamation do not hold."""


class SignatureClash(InstsmError):
    """Signatures cannot be combined into a product."""


class UnsupportedShape(InstsmError):
    """A refinement check was requested for an unsupported theory shape."""


class DSLError(InstsmError):
    """Parse or elaboration failure carrying diagnostics."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))
