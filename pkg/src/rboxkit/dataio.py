"""Annotation parsing, tiling/merging and on-disk formats.

Formats:

* DOTA-style annotation text: one instance per line,
  ``x1 y1 x2 y2 x3 y3 x4 y4 category difficult``; leading metadata lines
  whose first token is not numeric are skipped.
* Feature map binary: magic ``FMAP``, then version, H, W, C as 32-bit
  little-endian unsigned ints, then H*W*C IEEE-754 float32 values in
  row-major channel-last order.
* Box CSV: header ``label,score,cx,cy,w,h,theta`` with theta in radians,
  printed at full precision so round trips are lossless.
"""

import csv
import io
import math
import struct
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, FormatError, ParseError, UnknownTileError
from .geom import HALF_PI, Quadrilateral, RotatedBox, normalize_angle, wrap_half_pi
from .postprocess import Detection, rotated_nms

FMAP_MAGIC = b"FMAP"
FMAP_VERSION = 1

BOX_CSV_HEADER = ["label", "score", "cx", "cy", "w", "h", "theta"]


@dataclass(frozen=True)
class AnnotationRecord:
    """One ground-truth instance: quad vertices, category, difficulty flag."""

    quad: Quadrilateral
    category: str
    difficult: int = 0

    def __post_init__(self):
        if not self.category:
            raise ParseError("category must be non-empty")
        if self.difficult not in (0, 1):
            raise ParseError(f"difficult flag must be 0 or 1: {self.difficult}")


@dataclass(frozen=True)
class TileSpec:
    """One crop window of a source image."""

    tile_id: str
    x_off: int
    y_off: int
    width: int
    height: int
    source_image: str

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ConfigError(f"tile sides must be positive: {self.width}x{self.height}")


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def parse_dota(text: str) -> list:
    """Parse annotation text into records.

    Metadata lines (first token not numeric) are skipped while they appear
    before the first record; afterwards any malformed line raises ParseError
    with its line number.
    """
    records = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        if not records and not _is_number(tokens[0]):
            continue  # leading metadata such as imagesource/gsd
        if len(tokens) != 10:
            raise ParseError(f"expected 10 fields, got {len(tokens)}", line=lineno)
        try:
            coords = [float(t) for t in tokens[:8]]
            difficult = int(tokens[9])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        try:
            quad = Quadrilateral(*(tuple(coords[i : i + 2]) for i in range(0, 8, 2)))
            records.append(AnnotationRecord(quad, tokens[8], difficult))
        except (ParseError, ValueError) as exc:
            raise ParseError(str(exc), line=lineno) from None
    return records


def format_dota(records: Sequence[AnnotationRecord]) -> str:
    """Serialize records back to annotation text (one line per instance)."""
    lines = []
    for r in records:
        coords = " ".join(repr(c) for v in (r.quad.v1, r.quad.v2, r.quad.v3, r.quad.v4) for c in v)
        lines.append(f"{coords} {r.category} {r.difficult}")
    return "\n".join(lines) + ("\n" if lines else "")


def _axis_offsets(extent: int, patch: int, stride: int) -> list:
    offsets = [0]
    while offsets[-1] + patch < extent:
        offsets.append(min(offsets[-1] + stride, extent - patch))
    return offsets


def tile_plan(width: int, height: int, patch: int, stride: int, source_image: str = "image") -> list:
    """Crop windows covering a width x height image.

    Offsets advance by stride; the final offset is clamped so the last
    patch ends exactly at the image edge. Images smaller than the patch
    along an axis produce a single full-extent tile on that axis.
    """
    if stride <= 0 or patch < stride:
        raise ConfigError(f"need patch >= stride > 0: patch={patch}, stride={stride}")
    if width <= 0 or height <= 0:
        raise ConfigError(f"image extent must be positive: {width}x{height}")
    tile_w = min(patch, width)
    tile_h = min(patch, height)
    specs = []
    for y in _axis_offsets(height, tile_h, stride):
        for x in _axis_offsets(width, tile_w, stride):
            specs.append(
                TileSpec(f"{source_image}__{x}_{y}", x, y, tile_w, tile_h, source_image)
            )
    return specs


def clip_annotations(anns: Sequence[AnnotationRecord], tile: TileSpec) -> list:
    """Annotations fully inside the tile, shifted to tile-local coordinates.

    An instance with any vertex outside the tile counts as divided and is
    discarded; vertices exactly on the tile border are inside.
    """
    kept = []
    for a in anns:
        verts = (a.quad.v1, a.quad.v2, a.quad.v3, a.quad.v4)
        if all(
            tile.x_off <= x <= tile.x_off + tile.width
            and tile.y_off <= y <= tile.y_off + tile.height
            for x, y in verts
        ):
            shifted = Quadrilateral(*((x - tile.x_off, y - tile.y_off) for x, y in verts))
            kept.append(AnnotationRecord(shifted, a.category, a.difficult))
    return kept


def merge_detections(
    per_tile_dets: Mapping[str, Sequence[Detection]],
    specs: Sequence[TileSpec],
    final_nms_iou: float = 0.1,
    class_agnostic: bool = False,
) -> list:
    """Shift per-tile detections back to the source frame and deduplicate.

    Detections are concatenated in tile-manifest order and reduced by
    class-wise rotated NMS at final_nms_iou.
    """
    by_id = {s.tile_id: s for s in specs}
    unknown = set(per_tile_dets) - set(by_id)
    if unknown:
        raise UnknownTileError(f"detections reference unknown tiles: {sorted(unknown)}")
    merged = []
    for spec in specs:
        for d in per_tile_dets.get(spec.tile_id, ()):
            b = d.box
            merged.append(
                Detection(
                    RotatedBox(b.cx + spec.x_off, b.cy + spec.y_off, b.w, b.h, b.theta),
                    d.score,
                    d.class_id,
                )
            )
    kept = rotated_nms(merged, final_nms_iou, class_agnostic=class_agnostic)
    return [merged[i] for i in kept]


def _open_maybe(path_or_stream, mode):
    if hasattr(path_or_stream, "read") or hasattr(path_or_stream, "write"):
        return path_or_stream, False
    return open(path_or_stream, mode), True


def write_fmap(path_or_stream, fmap) -> None:
    """Write a feature map in the FMAP binary format (float32 payload)."""
    arr = np.asarray(fmap)
    if arr.ndim != 3:
        raise FormatError(f"feature map must be (H, W, C), got shape {arr.shape}")
    arr = np.ascontiguousarray(arr, dtype="<f4")
    stream, owned = _open_maybe(path_or_stream, "wb")
    try:
        stream.write(FMAP_MAGIC)
        stream.write(struct.pack("<IIII", FMAP_VERSION, *arr.shape))
        stream.write(arr.tobytes())
    finally:
        if owned:
            stream.close()


def read_fmap(path_or_stream) -> np.ndarray:
    """Read a feature map written by write_fmap; returns float32 (H, W, C)."""
    stream, owned = _open_maybe(path_or_stream, "rb")
    try:
        header = stream.read(20)
        if len(header) < 20 or header[:4] != FMAP_MAGIC:
            raise FormatError("not a feature map stream (bad magic)")
        version, height, width, channels = struct.unpack("<IIII", header[4:])
        if version != FMAP_VERSION:
            raise FormatError(f"unsupported feature map version {version}")
        count = height * width * channels
        payload = stream.read(4 * count)
        if len(payload) != 4 * count:
            raise FormatError(
                f"truncated payload: expected {4 * count} bytes, got {len(payload)}"
            )
        data = np.frombuffer(payload, dtype="<f4", count=count)
        if not np.all(np.isfinite(data)):
            raise FormatError("feature map contains non-finite values")
        return data.reshape(height, width, channels).copy()
    finally:
        if owned:
            stream.close()


def write_box_csv(path_or_stream, dets: Sequence[Detection]) -> None:
    """Write detections as CSV with full-precision floats."""
    stream, owned = _open_maybe(path_or_stream, "w")
    try:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(BOX_CSV_HEADER)
        for d in dets:
            b = d.box
            writer.writerow(
                [d.class_id, repr(d.score), repr(b.cx), repr(b.cy), repr(b.w), repr(b.h), repr(b.theta)]
            )
    finally:
        if owned:
            stream.close()


def read_box_csv(path_or_stream) -> list:
    """Read detections written by write_box_csv.

    Angles outside (-pi/2, pi/2) are brought to canonical form on read,
    with a warning.
    """
    stream, owned = _open_maybe(path_or_stream, "r")
    try:
        reader = csv.reader(stream)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("missing box CSV header") from None
        if [h.strip() for h in header] != BOX_CSV_HEADER:
            raise FormatError(f"bad box CSV header: {header!r}")
        dets = []
        for rownum, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 7:
                raise FormatError(f"row {rownum}: expected 7 columns, got {len(row)}")
            try:
                label = int(row[0])
                score, cx, cy, w, h, theta = (float(x) for x in row[1:])
            except ValueError as exc:
                raise FormatError(f"row {rownum}: {exc}") from None
            if not (-HALF_PI < theta < HALF_PI):
                box = normalize_angle(RotatedBox(cx, cy, w, h, wrap_half_pi(theta)))
                warnings.warn(
                    f"row {rownum}: theta {theta} outside (-pi/2, pi/2), normalized"
                )
            else:
                box = RotatedBox(cx, cy, w, h, theta)
            dets.append(Detection(box, score, label))
        return dets
    finally:
        if owned:
            stream.close()
