"""Exception hierarchy shared by every cubedeck module."""


class CubedeckError(Exception):
    """Base class for all errors raised by this package."""


class OrderingError(CubedeckError):
    """A sample's timestamp regressed below the previous sample."""


class MalformedSampleError(CubedeckError):
    """A sample field is out of range, non-finite, or inconsistent."""


class UnknownSubjectError(CubedeckError):
    """An event or sample references a cube that was never registered."""


class UnsupportedConfigurationError(CubedeckError):
    """Cubes with mismatched edge lengths cannot form contact relations."""


class DegenerateConfigurationError(CubedeckError):
    """Component members do not sit near integer lattice positions."""


class InsufficientHistoryError(CubedeckError):
    """Not enough pose samples inside the requested time window."""


class MismatchedUniverseError(CubedeckError):
    """Two configuration summaries cover different cube sets."""


class SchemaError(CubedeckError):
    """A dataset document violates the grid schema."""


class EmptySelectionError(CubedeckError):
    """A slice or filter selected no cells."""


class AlignmentError(CubedeckError):
    """Operands of an arithmetic operation have incompatible bins."""


class InvalidPartitionError(CubedeckError):
    """A chop or rescale request does not evenly partition the axis."""


class InsufficientResolutionError(CubedeckError):
    """A rescale asked for finer bins than the source data carries."""


class RulebookError(CubedeckError):
    """A rulebook file failed to parse; carries line/column position."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"line {line}, col {column}: {message}" if line else message)
        self.line = line
        self.column = column


class LayoutError(CubedeckError):
    """A session layout violates its geometric invariants."""


class StaleTargetError(CubedeckError):
    """A command addressed a cube, chart, or series that no longer exists."""


class TraceFormatError(CubedeckError):
    """A trace file is malformed; carries the offending line number."""

    def __init__(self, message: str, line: int = 0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class ResolutionError(CubedeckError):
    """A dataset or rulebook reference could not be resolved."""


class ProtocolError(CubedeckError):
    """A bridge connection violated the wire protocol."""
