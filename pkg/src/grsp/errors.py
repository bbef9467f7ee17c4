"""Exception types raised across the package."""


class GrspError(Exception):
    """Base class for all package errors."""


class GraphFormatError(GrspError, ValueError):
    """An edge-list or label file could not be parsed."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class SpecError(GrspError, ValueError):
    """A measure specification is malformed or invalid."""


class ContractError(GrspError, ValueError):
    """A caller violated an operation's precondition."""


class CapacityError(GrspError):
    """The requested computation exceeds the configured memory gate."""


class InsufficientNodesError(GrspError, ValueError):
    """Too few nodes satisfy the query eligibility filters."""
