"""Exception hierarchy shared by every module."""


class MRFAError(Exception):
    """Base class for all package errors."""


class ParameterRangeError(MRFAError, ValueError):
    """A numeric parameter lies outside its supported range."""


class DimensionError(MRFAError, ValueError):
    """Array shapes are inconsistent."""


class CapacityError(MRFAError):
    """A basis or candidate set would exceed a configured size cap.

    ``group`` names the offending ``(u, r)`` pair when one is known.
    """

    def __init__(self, message, group=None):
        super().__init__(message)
        self.group = group


class ConvergenceError(MRFAError):
    """An iterative solver stopped before meeting its tolerance."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NumericError(MRFAError, ValueError):
    """Non-finite inputs or an ill-posed numeric quantity."""


class DegeneratePointError(MRFAError):
    """The basis vector at a prediction point is identically zero."""


class IllConditionedError(MRFAError):
    """The decorrelated information ``b`` is not positive."""


class SchemaError(MRFAError):
    """A model file does not match the expected layout."""


class SchemaVersionError(SchemaError):
    """A model file was written by an unsupported schema version."""

    def __init__(self, found, supported):
        super().__init__(
            f"model file schema version {found} is not supported "
            f"(this build reads version {supported})"
        )
        self.found = found
        self.supported = supported
