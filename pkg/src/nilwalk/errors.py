"""Exception hierarchy shared across the package.

Structural problems (bad dimensions, unknown labels, mixed scalar layers)
are distinct from mathematical findings (an axiom violation is a report
entry, not an exception) and from resource limits.
"""


class NilwalkError(Exception):
    """Base class for all package errors."""


class StructuralError(NilwalkError):
    """Malformed input: dimension mismatch, unknown label, bad JSON shape."""


class LayerError(NilwalkError):
    """Exact (rational) and float scalar layers were mixed in one operation."""


class AlgebraMismatchError(NilwalkError):
    """Operands belong to different algebras."""


class ResourceError(NilwalkError):
    """A configured resource budget (monomials, samples) was exceeded."""


class MeasureError(NilwalkError):
    """A measure violates a documented precondition (e.g. not centered)."""


class SolveError(NilwalkError):
    """A constructive solve failed; carries the residual if available."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class InvarianceError(NilwalkError):
    """A polynomial is not a combination of symmetric statistics."""


class ConfigError(NilwalkError):
    """Invalid experiment configuration or CLI input."""
