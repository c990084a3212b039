"""rboxkit: deterministic geometry engine for rotated-object detection."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    FormatError,
    InvalidBoxError,
    InvalidQuadError,
    ParseError,
    RBoxError,
    ShapeError,
    UnknownTileError,
)
from .geom import (
    HorizontalBox,
    Quadrilateral,
    RotatedBox,
    enclosing_hbox,
    from_quad,
    hbox_iou,
    normalize_angle,
    rotated_iou,
    to_vertices,
    wrap_half_pi,
)

__all__ = [
    "__version__",
    "RBoxError",
    "InvalidBoxError",
    "InvalidQuadError",
    "ConfigError",
    "ShapeError",
    "ParseError",
    "FormatError",
    "UnknownTileError",
    "RotatedBox",
    "HorizontalBox",
    "Quadrilateral",
    "to_vertices",
    "from_quad",
    "normalize_angle",
    "enclosing_hbox",
    "rotated_iou",
    "hbox_iou",
    "wrap_half_pi",
]
