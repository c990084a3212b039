"""Batch array bindings over rboxkit.

Boxes travel as contiguous (n, 5) float arrays of (cx, cy, w, h, theta)
rows. Every function applies the corresponding rboxkit operation row by
row, so results are bit-identical to scalar calls; no numeric code lives
here. Functions keep no state and are safe to call from multiple threads.

ndarray inputs must be row-major (C-contiguous); strided views are
rejected rather than silently copied. Non-array sequences are converted
on entry.
"""

import numpy as np

import rboxkit
from rboxkit.errors import ConfigError, RBoxError, ShapeError
from rboxkit.geom import HorizontalBox, RotatedBox, rotated_iou
from rboxkit.kernels import RRoiAlignConfig, rroi_align
from rboxkit.postprocess import Detection, rotated_nms
from rboxkit.targets import (
    HorizontalDelta,
    LocalTarget,
    TransformParams,
    decode_hdelta,
    decode_local,
    decode_transform,
    encode_hdelta,
    encode_local,
    encode_transform,
)

__version__ = rboxkit.__version__

__all__ = [
    "__version__",
    "batch_rotated_iou",
    "batch_nms",
    "batch_encode_decode",
    "batch_rroi_align",
]


def _as_batch(arr, name, cols):
    if isinstance(arr, np.ndarray):
        if arr.ndim == 2 and not arr.flags.c_contiguous:
            raise ShapeError(f"{name} must be row-major (C-contiguous), not a strided view")
        a = arr.astype(np.float64, copy=False)
    else:
        a = np.asarray(arr, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != cols:
        raise ShapeError(f"{name} must have shape (n, {cols}), got {a.shape}")
    return a


def _rbox_row(row, name, i):
    try:
        return RotatedBox(*map(float, row))
    except RBoxError as exc:
        raise type(exc)(f"{name} row {i}: {exc}") from None


def _hbox_row(row, name, i):
    try:
        return HorizontalBox(*map(float, row))
    except RBoxError as exc:
        raise type(exc)(f"{name} row {i}: {exc}") from None


def batch_rotated_iou(a, b) -> np.ndarray:
    """Pairwise rotated IoU matrix: entry (i, j) = IoU(a[i], b[j])."""
    a = _as_batch(a, "a", 5)
    b = _as_batch(b, "b", 5)
    boxes_a = [_rbox_row(row, "a", i) for i, row in enumerate(a)]
    boxes_b = [_rbox_row(row, "b", i) for i, row in enumerate(b)]
    out = np.empty((len(boxes_a), len(boxes_b)))
    for i, ba in enumerate(boxes_a):
        for j, bb in enumerate(boxes_b):
            out[i, j] = rotated_iou(ba, bb)
    return out


def batch_nms(boxes, scores, iou_thresh: float, class_ids=None) -> np.ndarray:
    """Greedy rotated NMS over box rows; returns kept indices (int64).

    class_ids, when given, makes suppression class-wise exactly as in the
    scalar library.
    """
    boxes = _as_batch(boxes, "boxes", 5)
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (boxes.shape[0],):
        raise ShapeError(f"scores must have shape ({boxes.shape[0]},), got {scores.shape}")
    if class_ids is None:
        cls = np.zeros(boxes.shape[0], dtype=np.int64)
    else:
        cls = np.asarray(class_ids, dtype=np.int64)
        if cls.shape != (boxes.shape[0],):
            raise ShapeError(f"class_ids must have shape ({boxes.shape[0]},), got {cls.shape}")
    dets = [
        Detection(_rbox_row(row, "boxes", i), float(scores[i]), int(cls[i]))
        for i, row in enumerate(boxes)
    ]
    return np.asarray(rotated_nms(dets, iou_thresh), dtype=np.int64)


_CODERS = {
    # mode: (ref columns, second-argument columns, output columns, row function)
    "encode_hdelta": (4, 4, 4, lambda r, t: _tup(encode_hdelta(r, t), "ux uy uw uh")),
    "decode_hdelta": (4, 4, 4, lambda r, c: _tup(decode_hdelta(r, HorizontalDelta(*c)), "cx cy w h")),
    "encode_transform": (4, 5, 4, lambda r, t: _tup(encode_transform(r, t), "v1 v2 v3 v4")),
    "decode_transform": (4, 4, 5, lambda r, c: _tup(decode_transform(r, TransformParams(*c)), "cx cy w h theta")),
    "encode_local": (5, 5, 5, lambda r, t: _tup(encode_local(r, t), "lx ly sh sw otheta")),
    "decode_local": (5, 5, 5, lambda r, c: _tup(decode_local(r, LocalTarget(*c)), "cx cy w h theta")),
}


def _tup(obj, fields):
    return tuple(getattr(obj, f) for f in fields.split())


def batch_encode_decode(mode: str, refs, targets_or_codes) -> np.ndarray:
    """Row-wise box coding; mode selects the coder and direction.

    Modes: encode_hdelta, decode_hdelta, encode_transform, decode_transform,
    encode_local, decode_local. Box rows are (cx, cy, w, h[, theta]); code
    rows are the coder's field order.
    """
    if mode not in _CODERS:
        raise ConfigError(f"unknown mode {mode!r}; choose one of {sorted(_CODERS)}")
    ref_cols, arg_cols, out_cols, fn = _CODERS[mode]
    refs = _as_batch(refs, "refs", ref_cols)
    args = _as_batch(targets_or_codes, "targets_or_codes", arg_cols)
    if refs.shape[0] != args.shape[0]:
        raise ShapeError(f"row counts differ: {refs.shape[0]} refs vs {args.shape[0]}")
    make_ref = _rbox_row if ref_cols == 5 else _hbox_row
    out = np.empty((refs.shape[0], out_cols))
    for i in range(refs.shape[0]):
        ref = make_ref(refs[i], "refs", i)
        if mode.startswith("encode"):
            make_arg = _rbox_row if arg_cols == 5 else _hbox_row
            arg = make_arg(args[i], "targets_or_codes", i)
        else:
            arg = tuple(map(float, args[i]))
        try:
            out[i] = fn(ref, arg)
        except RBoxError as exc:
            raise type(exc)(f"row {i}: {exc}") from None
    return out


def batch_rroi_align(fmap, boxes, k: int = 7, ks: int = 2) -> np.ndarray:
    """Rotated RoI align of every box row; returns (n, k, k, C)."""
    fmap = np.asarray(fmap, dtype=np.float64)
    if fmap.ndim != 3:
        raise ShapeError(f"feature map must be (H, W, C), got shape {fmap.shape}")
    boxes = _as_batch(boxes, "boxes", 5)
    cfg = RRoiAlignConfig(k=k, ks=ks)
    out = np.empty((boxes.shape[0], k, k, fmap.shape[2]))
    for i, row in enumerate(boxes):
        out[i] = rroi_align(fmap, _rbox_row(row, "boxes", i), cfg)
    return out
