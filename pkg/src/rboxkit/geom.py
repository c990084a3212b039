"""Rotated / horizontal box types, angle canonicalization and exact IoU.

Coordinates follow the image convention: x grows to the right, y grows
downward, angles are in radians. A rotated box is the axis-aligned
rectangle centered at (cx, cy) with side w along x and side h along y,
rotated about its center by theta. The rotation matrix
``[[cos, -sin], [sin, cos]]`` is applied literally in these coordinates.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._clip import AREA_EPS, iou_from_quads, polygon_area
from .errors import InvalidBoxError, InvalidQuadError

# Sides below this are rejected; avoids NaN/inf in log-ratio encodings.
MIN_SIDE = 1e-6

HALF_PI = math.pi / 2.0
QUARTER_PI = math.pi / 4.0


def wrap_half_pi(theta: float) -> float:
    """Wrap an angle to (-pi/2, pi/2] by adding a multiple of pi.

    Rectangles are invariant under rotation by pi, so the wrapped angle
    describes the same point set. Angles already in range pass through
    bit-exact.
    """
    t = math.fmod(theta, math.pi)
    if t <= -HALF_PI:
        t += math.pi
    elif t > HALF_PI:
        t -= math.pi
    return t


@dataclass(frozen=True)
class RotatedBox:
    """Center/size/angle box: (cx, cy, w, h, theta), theta in (-pi/2, pi/2]."""

    cx: float
    cy: float
    w: float
    h: float
    theta: float = 0.0

    def __post_init__(self):
        vals = (self.cx, self.cy, self.w, self.h, self.theta)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidBoxError(f"non-finite box fields: {vals}")
        if self.w < MIN_SIDE or self.h < MIN_SIDE:
            raise InvalidBoxError(f"box sides must be >= {MIN_SIDE}: w={self.w}, h={self.h}")
        if not (-HALF_PI < self.theta <= HALF_PI):
            raise InvalidBoxError(f"theta must lie in (-pi/2, pi/2]: {self.theta}")

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class HorizontalBox:
    """Axis-aligned box: center (cx, cy), width w, height h."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        vals = (self.cx, self.cy, self.w, self.h)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidBoxError(f"non-finite box fields: {vals}")
        if self.w < MIN_SIDE or self.h < MIN_SIDE:
            raise InvalidBoxError(f"box sides must be >= {MIN_SIDE}: w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def x1(self) -> float:
        return self.cx - self.w / 2.0

    @property
    def y1(self) -> float:
        return self.cy - self.h / 2.0

    @property
    def x2(self) -> float:
        return self.cx + self.w / 2.0

    @property
    def y2(self) -> float:
        return self.cy + self.h / 2.0


@dataclass(frozen=True)
class Quadrilateral:
    """Four ordered vertices, each an (x, y) pair.

    The vertex order convention is the rotated image of the axis-aligned
    corner order (-w/2,-h/2), (w/2,-h/2), (w/2,h/2), (-w/2,h/2).
    """

    v1: tuple
    v2: tuple
    v3: tuple
    v4: tuple

    def __post_init__(self):
        for v in (self.v1, self.v2, self.v3, self.v4):
            if len(v) != 2 or not all(math.isfinite(c) for c in v):
                raise InvalidQuadError(f"quad vertices must be finite (x, y) pairs: {v}")

    @classmethod
    def from_array(cls, arr) -> "Quadrilateral":
        a = np.asarray(arr, dtype=np.float64)
        if a.shape != (4, 2):
            raise InvalidQuadError(f"expected (4, 2) vertex array, got {a.shape}")
        return cls(*(tuple(map(float, row)) for row in a))

    def as_array(self) -> np.ndarray:
        return np.array([self.v1, self.v2, self.v3, self.v4], dtype=np.float64)


def _vertices(b: RotatedBox) -> np.ndarray:
    """Vertex array (4, 2) of a rotated box, in the canonical corner order."""
    c = math.cos(b.theta)
    s = math.sin(b.theta)
    hw = b.w / 2.0
    hh = b.h / 2.0
    out = np.empty((4, 2))
    k = 0
    for px, py in ((-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)):
        out[k, 0] = b.cx + c * px - s * py
        out[k, 1] = b.cy + s * px + c * py
        k += 1
    return out


def to_vertices(b: RotatedBox) -> Quadrilateral:
    """Corner points of a rotated box (rotation applied about the center)."""
    return Quadrilateral.from_array(_vertices(b))


def _from_quad_array(arr: np.ndarray) -> RotatedBox:
    area = polygon_area(arr, 4)
    if area < AREA_EPS:
        raise InvalidQuadError(f"zero-area quadrilateral (area={area})")
    cx = float(arr[:, 0].mean())
    cy = float(arr[:, 1].mean())
    theta = wrap_half_pi(math.atan2(arr[1, 1] - arr[0, 1], arr[1, 0] - arr[0, 0]))
    # Vertex coordinates in the local frame: rotate by -theta about the centroid.
    c = math.cos(theta)
    s = math.sin(theta)
    dx = arr[:, 0] - cx
    dy = arr[:, 1] - cy
    xl = c * dx + s * dy
    yl = -s * dx + c * dy
    w = max(abs(xl[0] - xl[1]), abs(xl[2] - xl[3]))
    h = max(abs(yl[0] - yl[3]), abs(yl[1] - yl[2]))
    return RotatedBox(cx, cy, float(w), float(h), theta)


def from_quad(q: Quadrilateral) -> RotatedBox:
    """Adjoint rotated rectangle of a quadrilateral.

    The rectangle shares the quad's centroid and the direction of its
    v1->v2 edge; its sides are the larger of the two opposing local-frame
    vertex gaps. For quads produced by to_vertices this inverts exactly.
    """
    return _from_quad_array(q.as_array())


def normalize_angle(b: RotatedBox) -> RotatedBox:
    """Equivalent box with |theta| <= pi/4.

    Cyclically reassigning which side counts as w shifts theta by a
    multiple of pi/2 (swapping w and h on odd shifts) without moving any
    vertex; of the candidate angles, the one of minimum magnitude is
    chosen. A tie at exactly +-pi/4 resolves to +pi/4.
    """
    t0 = wrap_half_pi(b.theta)
    t1 = wrap_half_pi(b.theta + HALF_PI)
    if abs(t0) < abs(t1):
        return RotatedBox(b.cx, b.cy, b.w, b.h, t0)
    if abs(t1) < abs(t0):
        return RotatedBox(b.cx, b.cy, b.h, b.w, t1)
    # |t0| == |t1| == pi/4: keep the non-negative angle.
    if t0 >= 0.0:
        return RotatedBox(b.cx, b.cy, b.w, b.h, t0)
    return RotatedBox(b.cx, b.cy, b.h, b.w, t1)


def enclosing_hbox(b: RotatedBox) -> HorizontalBox:
    """Tightest axis-aligned box containing the rotated box; same center."""
    c = abs(math.cos(b.theta))
    s = abs(math.sin(b.theta))
    return HorizontalBox(b.cx, b.cy, b.w * c + b.h * s, b.w * s + b.h * c)


def _box_key(b: RotatedBox):
    return (b.cx, b.cy, b.w, b.h, b.theta)


def _hboxes_disjoint(va: np.ndarray, vb: np.ndarray) -> bool:
    return bool(
        va[:, 0].min() > vb[:, 0].max()
        or va[:, 0].max() < vb[:, 0].min()
        or va[:, 1].min() > vb[:, 1].max()
        or va[:, 1].max() < vb[:, 1].min()
    )


def rotated_iou(a: RotatedBox, b: RotatedBox) -> float:
    """Exact IoU of two rotated boxes in [0, 1].

    The intersection is computed by Sutherland-Hodgman clipping of the
    two vertex quads and a shoelace area. Arguments are ordered by a
    deterministic key first, so the result is exactly symmetric.
    """
    if _box_key(b) < _box_key(a):
        a, b = b, a
    va = _vertices(a)
    vb = _vertices(b)
    if _hboxes_disjoint(va, vb):
        return 0.0
    return float(iou_from_quads(va, vb, polygon_area(va, 4), polygon_area(vb, 4)))


def hbox_iou(a: HorizontalBox, b: HorizontalBox) -> float:
    """Axis-aligned IoU; agrees with rotated_iou at theta = 0."""
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)
