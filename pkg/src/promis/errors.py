"""Exception hierarchy.

Every error raised on purpose derives from :class:`PromisError`. The
``exit_code`` attribute is what the command line front end returns:
1 for bad data, 2 for bad usage or configuration.
"""

from __future__ import annotations


class PromisError(Exception):
    exit_code = 1


class InvalidArgumentError(PromisError, ValueError):
    exit_code = 2


class ConfigurationError(PromisError):
    exit_code = 2


class InvalidCoordinateError(PromisError, ValueError):
    pass


class GeoParseError(PromisError):
    """Malformed geodata; ``offset`` is the byte offset when known."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class UnsupportedGeometryError(PromisError):
    def __init__(self, feature_id: str, geometry_type: str):
        super().__init__(f"feature {feature_id}: unsupported geometry type {geometry_type!r}")
        self.feature_id = feature_id
        self.geometry_type = geometry_type


class ResolutionError(PromisError):
    pass


class GeometryError(PromisError, ValueError):
    pass


class RelationUndefinedError(PromisError):
    def __init__(self, feature_type: str):
        super().__init__(f"no map feature matches type {feature_type!r}")
        self.feature_type = feature_type


class RasterFormatError(PromisError):
    pass


class ProgramSyntaxError(PromisError):
    """Located error from the logic program parser."""

    def __init__(self, message: str, line: int, column: int, expected: tuple[str, ...] = ()):
        text = f"{line}:{column}: {message}"
        if expected:
            text += f" (expected one of: {', '.join(expected)})"
        super().__init__(text)
        self.line = line
        self.column = column
        self.expected = expected
        self.reason = message


class GroundingError(PromisError):
    pass


class CycleError(GroundingError):
    def __init__(self, cycle: list[str]):
        super().__init__("cyclic ground program: " + " -> ".join(cycle))
        self.cycle = cycle


class CapacityError(PromisError):
    def __init__(self, count: int, limit: int):
        super().__init__(
            f"{count} choice points exceed the enumeration limit of {limit}"
        )
        self.count = count
        self.limit = limit


class InferenceError(PromisError):
    pass


class LocationError(PromisError):
    """A per-location failure, tagged with the grid index where it happened."""

    def __init__(self, index: int, cause: PromisError):
        super().__init__(f"location {index}: {cause}")
        self.index = index
        self.cause = cause
        self.exit_code = cause.exit_code
