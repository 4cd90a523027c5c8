"""Exception hierarchy shared by all modules."""


class ProxAtlasError(Exception):
    """Base class for every error raised by the package."""


class DomainError(ProxAtlasError, ValueError):
    """A point, stencil or segment leaves the domain of an operator."""


class LocusError(ProxAtlasError, ValueError):
    """A point sits on (or too close to) a nondifferentiability locus."""


class StateError(ProxAtlasError, RuntimeError):
    """An operation was called on an object in the wrong state."""


class NoInverseError(ProxAtlasError, ArithmeticError):
    """Newton inversion did not converge within its budget."""


class SingularJacobianError(ProxAtlasError, ArithmeticError):
    """The Jacobian is singular at a Newton iterate."""


class ShapeError(ProxAtlasError, ValueError):
    """Array shapes of an operator and a matrix are inconsistent."""


class UnsupportedError(ProxAtlasError, ValueError):
    """The request is valid but outside what the routine handles."""


class SpecError(ProxAtlasError, ValueError):
    """A catalog id or a JSON spec file could not be parsed."""
