"""Exception types shared across the package."""


class CrystalSpectraError(Exception):
    """Base class for all package errors."""


class ShapeError(CrystalSpectraError, ValueError):
    """Arrays do not match the graph they are attached to."""


class ValidationError(CrystalSpectraError, ValueError):
    """A crystal descriptor or perturbation profile is malformed.

    ``field`` names the offending entry, e.g. ``"edges[0].measure"``.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class CatalogError(CrystalSpectraError, KeyError):
    """Unknown name requested from the lattice catalog."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class WindowError(CrystalSpectraError, ValueError):
    """A lattice cochain would leave the evaluation window."""


class ConfigurationError(CrystalSpectraError, ValueError):
    """Missing auxiliary data, e.g. no stored path between two base elements."""


class InsufficientDataError(CrystalSpectraError, ValueError):
    """Not enough dyadic shells to say anything about decay."""


class NumericError(CrystalSpectraError, RuntimeError):
    """An eigensolver failed or returned pairs with large residuals."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)
