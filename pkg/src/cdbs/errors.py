"""Exception hierarchy shared by every module."""


class CdbsError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(CdbsError, ValueError):
    """Matrix or state shapes are inconsistent."""


class ConservationError(CdbsError, ValueError):
    """Input and output photon numbers differ."""


class ResourceLimitError(CdbsError, RuntimeError):
    """A configured enumeration or memory cap would be exceeded.

    ``size`` carries the computed size that tripped the cap.
    """

    def __init__(self, message, size=None, cap=None):
        super().__init__(message)
        self.size = size
        self.cap = cap


class InfeasiblePostselectionError(CdbsError, RuntimeError):
    """The postselection pattern has (numerically) zero probability."""

    def __init__(self, message, success_probability=0.0):
        super().__init__(message)
        self.success_probability = success_probability


class UnsupportedDepthError(CdbsError, ValueError):
    """A shallow-circuit routine received a circuit deeper than two layers."""

    def __init__(self, message, layer=None):
        super().__init__(message)
        self.layer = layer


class ValidationError(CdbsError, ValueError):
    """A circuit or graph program violates its structural invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class ParseError(CdbsError, ValueError):
    """A text file could not be parsed. ``line`` is 1-based when known."""

    def __init__(self, message, line=None, field=None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
        self.field = field
