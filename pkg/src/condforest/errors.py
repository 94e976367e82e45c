"""Exception types shared across the package."""


class CondForestError(Exception):
    """Base class for all library errors."""


class ValidationError(CondForestError, ValueError):
    """Input does not satisfy a documented precondition."""


class InfeasibleSpecError(ValidationError):
    """A conditioning event has probability zero."""

    def __init__(self, message, probability=0.0):
        super().__init__(message)
        self.probability = probability


class SizeCapExceeded(CondForestError):
    """Galton-Watson sampling reached the configured vertex cap."""

    def __init__(self, cap):
        super().__init__(f"cap hit: tree exceeded {cap} vertices")
        self.cap = cap


class NoCrossingError(CondForestError):
    """No crossing of the rescaling curve was found on the grid."""


class HorizonError(CondForestError):
    """A first-passage level is not reached within the simulated horizon."""


class ParseError(CondForestError, ValueError):
    """Malformed serialized input; carries the offending line or field."""

    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field
