"""Exception types raised by rboxkit."""


class RBoxError(ValueError):
    """Base class for all rboxkit errors."""


class InvalidBoxError(RBoxError):
    """A box has non-finite fields, non-positive sides, or an out-of-range angle."""


class InvalidQuadError(RBoxError):
    """A quadrilateral is degenerate (zero area / collinear vertices) or non-finite."""


class ConfigError(RBoxError):
    """A configuration object violates its invariants."""


class ShapeError(RBoxError):
    """Array arguments have mismatched or unexpected shapes."""


class ParseError(RBoxError):
    """A text input could not be parsed.

    Attributes:
        line: 1-based line number of the offending line, when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class FormatError(RBoxError):
    """A binary or CSV stream does not conform to its declared format."""


class UnknownTileError(RBoxError):
    """A detection references a tile_id missing from the tile manifest."""
