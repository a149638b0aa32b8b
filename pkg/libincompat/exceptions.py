"""Custom exception types for the libincompat library."""


class IncompatException(Exception):
    """Base exception for all libincompat errors.

    All libincompat exceptions inherit from this base class, allowing
    for easy catching of library-specific errors.
    """


class FieldSyntaxError(IncompatException):
    """Raised when a scalar field expression cannot be parsed.

    The `offset` attribute holds the byte offset into the source string
    where parsing failed.
    """

    offset: int

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class FieldDomainError(IncompatException):
    """Raised when a field expression is evaluated outside its domain.

    This occurs for the logarithm of a nonpositive value, the square root of
    a negative value or a division by zero. The `subexpression` attribute holds
    the pretty-printed offending subexpression.
    """

    subexpression: str

    def __init__(self, message: str, subexpression: str) -> None:
        super().__init__(f"{message}: {subexpression}")
        self.subexpression = subexpression


class MetricException(IncompatException):
    """Raised when a metric is degenerate or not positive definite."""


class MeshException(IncompatException):
    """Raised when a triangulation cannot be built or is inconsistent.

    This typically occurs when the lattice scale is too large for the chart
    domain, or when an edge has no incident triangle.
    """


class EnergyException(IncompatException):
    """Raised when an energy or its gradient is undefined for the input."""


class ConfigException(IncompatException):
    """Raised when a problem configuration is invalid.

    The `field_path` attribute names the offending configuration entry,
    e.g. `metric.phi`.
    """

    field_path: str

    def __init__(self, message: str, field_path: str = "") -> None:
        super().__init__(f"{field_path}: {message}" if field_path else message)
        self.field_path = field_path


class SolverException(IncompatException):
    """Raised when a minimization cannot be started or produces no finite iterate."""


class ChartDomainException(IncompatException):
    """Raised when a point or a segment leaves the chart rectangle."""
