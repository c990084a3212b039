"""Anchor generation, label assignment, minibatch sampling and box coding.

Three encode/decode pairs are provided, all exact mutual inverses:

* horizontal deltas (ux, uy, uw, uh) between axis-aligned boxes,
* affine transform parameters (v1..v4) carrying a horizontal proposal
  onto a rotated box via a 2x2 rotation-scale matrix about the shared
  center, and
* local-frame targets (lx, ly, sh, sw, otheta) expressing a rotated box
  in a rotated proposal's own coordinate system.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, ShapeError
from .geom import (
    HorizontalBox,
    Quadrilateral,
    RotatedBox,
    _from_quad_array,
    enclosing_hbox,
    rotated_iou,
    wrap_half_pi,
)

POSITIVE = 1
NEGATIVE = 0
IGNORE = -1

# exp() guard for pathological predicted log-ratios
MAX_LOG_RATIO = 10.0


@dataclass(frozen=True)
class AnchorConfig:
    """Per-level anchor scales and strides plus shared aspect ratios."""

    scales: Sequence[float]
    aspect_ratios: Sequence[float]
    stride_per_level: Sequence[float]

    def __post_init__(self):
        if not self.scales or not self.aspect_ratios or not self.stride_per_level:
            raise ConfigError("anchor config must have scales, ratios and strides")
        if len(self.scales) != len(self.stride_per_level):
            raise ConfigError("one scale and one stride per pyramid level")
        if any(s <= 0 for s in self.scales) or any(s <= 0 for s in self.stride_per_level):
            raise ConfigError("scales and strides must be positive")
        if any(r <= 0 for r in self.aspect_ratios):
            raise ConfigError("aspect ratios must be positive")


@dataclass(frozen=True)
class HorizontalDelta:
    """Center offsets in anchor-size units plus log size ratios."""

    ux: float
    uy: float
    uw: float
    uh: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.ux, self.uy, self.uw, self.uh)):
            raise ShapeError("non-finite delta")


@dataclass(frozen=True)
class TransformParams:
    """Entries of the 2x2 rotation-scale matrix [[v1, v2], [v3, v4]]."""

    v1: float
    v2: float
    v3: float
    v4: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.v1, self.v2, self.v3, self.v4)):
            raise ShapeError("non-finite transform parameters")


@dataclass(frozen=True)
class LocalTarget:
    """Proposal-frame regression target: offsets, log sizes, angle delta."""

    lx: float
    ly: float
    sh: float
    sw: float
    otheta: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.lx, self.ly, self.sh, self.sw, self.otheta)):
            raise ShapeError("non-finite local target")


@dataclass(frozen=True)
class AssignConfig:
    """IoU thresholds and sampling quotas for one detection stage."""

    pos_iou: float
    neg_iou: float
    batch: int
    pos_fraction: float

    def __post_init__(self):
        if not (0.0 <= self.neg_iou <= self.pos_iou <= 1.0):
            raise ConfigError("need 0 <= neg_iou <= pos_iou <= 1")
        if not (0.0 < self.pos_fraction <= 1.0):
            raise ConfigError("pos_fraction must lie in (0, 1]")
        if self.batch <= 0:
            raise ConfigError("batch must be positive")

    @classmethod
    def rpn(cls) -> "AssignConfig":
        # 256 samples, half positive; classic RPN 0.7/0.3 thresholds.
        return cls(pos_iou=0.7, neg_iou=0.3, batch=256, pos_fraction=0.5)

    @classmethod
    def rroi(cls) -> "AssignConfig":
        # Second stage: 512 samples with 128 positives, single 0.5 threshold.
        return cls(pos_iou=0.5, neg_iou=0.5, batch=512, pos_fraction=0.25)


def generate_anchors(level_shapes: Sequence[tuple], cfg: AnchorConfig) -> list:
    """Anchor boxes for a feature pyramid, ordered (level, row, col, ratio).

    At each cell the anchor center is stride * (index + 0.5). Every aspect
    ratio r keeps the level's area scale**2: w = scale * sqrt(1/r),
    h = scale * sqrt(r).
    """
    if len(level_shapes) != len(cfg.scales):
        raise ConfigError(
            f"{len(level_shapes)} level shapes for {len(cfg.scales)} scales"
        )
    anchors = []
    for (height, width), scale, stride in zip(level_shapes, cfg.scales, cfg.stride_per_level):
        if height <= 0 or width <= 0:
            raise ConfigError(f"level shape must be positive: {(height, width)}")
        sizes = [(scale * math.sqrt(1.0 / r), scale * math.sqrt(r)) for r in cfg.aspect_ratios]
        for i in range(height):
            cy = stride * (i + 0.5)
            for j in range(width):
                cx = stride * (j + 0.5)
                for w, h in sizes:
                    anchors.append(HorizontalBox(cx, cy, w, h))
    return anchors


def _hbox_iou_matrix(boxes_a: Sequence[HorizontalBox], boxes_b: Sequence[HorizontalBox]) -> np.ndarray:
    a = np.array([[b.x1, b.y1, b.x2, b.y2] for b in boxes_a])
    b = np.array([[g.x1, g.y1, g.x2, g.y2] for g in boxes_b])
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    return inter / (area_a[:, None] + area_b[None, :] - inter)


def _assign_from_iou(iou: np.ndarray, pos_thr: float, neg_thr: float):
    """Labels and matches from an (n_boxes, n_gt) IoU matrix."""
    n = iou.shape[0]
    labels = np.full(n, IGNORE, dtype=np.int8)
    matched = np.full(n, -1, dtype=np.int64)
    if iou.shape[1] == 0:
        labels[:] = NEGATIVE
        return labels, matched
    best = iou.max(axis=1)
    best_gt = iou.argmax(axis=1)
    labels[best < neg_thr] = NEGATIVE
    labels[best >= pos_thr] = POSITIVE
    matched[labels == POSITIVE] = best_gt[labels == POSITIVE]
    # Every gt keeps its best-overlapping anchor(s), regardless of threshold.
    for j in range(iou.shape[1]):
        gt_best = iou[:, j].max()
        if gt_best > 0.0:
            hits = np.flatnonzero(iou[:, j] == gt_best)
        else:
            hits = np.array([int(iou[:, j].argmax())])
        labels[hits] = POSITIVE
        for i in hits:
            if matched[i] < 0 or iou[i, j] > iou[i, matched[i]]:
                matched[i] = j
    return labels, matched


def assign_rpn(anchors: Sequence[HorizontalBox], gt_rboxes: Sequence[RotatedBox], cfg: AssignConfig):
    """Label anchors against the horizontal enclosing boxes of rotated gts.

    Returns (labels, matched_gt): labels holds POSITIVE / NEGATIVE / IGNORE
    per anchor, matched_gt the index of the assigned gt for positives
    (-1 elsewhere). Every gt receives at least one positive anchor.
    """
    if len(gt_rboxes) == 0:
        return (
            np.full(len(anchors), NEGATIVE, dtype=np.int8),
            np.full(len(anchors), -1, dtype=np.int64),
        )
    iou = _hbox_iou_matrix(anchors, [enclosing_hbox(g) for g in gt_rboxes])
    return _assign_from_iou(iou, cfg.pos_iou, cfg.neg_iou)


def assign_rroi(proposals: Sequence[RotatedBox], gt_rboxes: Sequence[RotatedBox], cfg: AssignConfig):
    """Label rotated proposals against rotated gts by exact rotated IoU."""
    if len(gt_rboxes) == 0:
        return (
            np.full(len(proposals), NEGATIVE, dtype=np.int8),
            np.full(len(proposals), -1, dtype=np.int64),
        )
    iou = np.empty((len(proposals), len(gt_rboxes)))
    for i, p in enumerate(proposals):
        for j, g in enumerate(gt_rboxes):
            iou[i, j] = rotated_iou(p, g)
    return _assign_from_iou(iou, cfg.pos_iou, cfg.neg_iou)


def sample_minibatch(labels: np.ndarray, cfg: AssignConfig, seed: int) -> np.ndarray:
    """Sample up to cfg.batch indices, at most batch*pos_fraction positive.

    Short positive quotas are padded with negatives. Selection is a pure
    function of (labels, cfg, seed).
    """
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    pos = np.flatnonzero(labels == POSITIVE)
    neg = np.flatnonzero(labels == NEGATIVE)
    if pos.size == 0 and neg.size == 0:
        warnings.warn("no positive or negative candidates to sample")
        return np.empty(0, dtype=np.int64)
    quota = int(round(cfg.batch * cfg.pos_fraction))
    n_pos = min(pos.size, quota)
    if pos.size > n_pos:
        pos = rng.choice(pos, size=n_pos, replace=False)
    n_neg = min(neg.size, cfg.batch - n_pos)
    if neg.size > n_neg:
        neg = rng.choice(neg, size=n_neg, replace=False)
    return np.concatenate([pos, neg]).astype(np.int64)


def encode_hdelta(anchor: HorizontalBox, target: HorizontalBox) -> HorizontalDelta:
    """Center offsets in anchor units plus log size ratios."""
    return HorizontalDelta(
        ux=(target.cx - anchor.cx) / anchor.w,
        uy=(target.cy - anchor.cy) / anchor.h,
        uw=math.log(target.w / anchor.w),
        uh=math.log(target.h / anchor.h),
    )


def decode_hdelta(anchor: HorizontalBox, d: HorizontalDelta) -> HorizontalBox:
    """Inverse of encode_hdelta; log ratios are clamped to +-MAX_LOG_RATIO."""
    uw = min(max(d.uw, -MAX_LOG_RATIO), MAX_LOG_RATIO)
    uh = min(max(d.uh, -MAX_LOG_RATIO), MAX_LOG_RATIO)
    return HorizontalBox(
        cx=d.ux * anchor.w + anchor.cx,
        cy=d.uy * anchor.h + anchor.cy,
        w=anchor.w * math.exp(uw),
        h=anchor.h * math.exp(uh),
    )


def encode_transform(hprop: HorizontalBox, gt: RotatedBox) -> TransformParams:
    """Rotation-scale matrix entries carrying hprop onto gt.

    The proposal's own angle is zero, so the entries are the products of
    per-axis size ratios with cos/sin of the gt angle. gt is expected in
    canonical (minimum-angle) form for training targets.
    """
    c = math.cos(gt.theta)
    s = math.sin(gt.theta)
    rw = gt.w / hprop.w
    rh = gt.h / hprop.h
    return TransformParams(v1=rw * c, v2=-rh * s, v3=rw * s, v4=rh * c)


def transform_to_quad(hprop: HorizontalBox, v: TransformParams) -> Quadrilateral:
    """Apply the 2x2 matrix to hprop's corner offsets about its center."""
    hw = hprop.w / 2.0
    hh = hprop.h / 2.0
    pts = []
    for px, py in ((-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)):
        pts.append(
            (
                hprop.cx + v.v1 * px + v.v2 * py,
                hprop.cy + v.v3 * px + v.v4 * py,
            )
        )
    return Quadrilateral(*pts)


def decode_transform(hprop: HorizontalBox, v: TransformParams) -> RotatedBox:
    """Rotated box predicted by transform parameters.

    The transformed corners form a quadrilateral in general (the matrix
    need not be a pure rotation-scale); it is reduced to its adjoint
    rotated rectangle. Raises InvalidQuadError/InvalidBoxError for
    degenerate outputs, which callers drop.
    """
    q = transform_to_quad(hprop, v)
    return _from_quad_array(q.as_array())


def encode_local(prop: RotatedBox, gt: RotatedBox) -> LocalTarget:
    """Express gt in the rotated proposal's local frame."""
    c = math.cos(prop.theta)
    s = math.sin(prop.theta)
    dx = gt.cx - prop.cx
    dy = gt.cy - prop.cy
    return LocalTarget(
        lx=(dx * c + dy * s) / prop.w,
        ly=(-dx * s + dy * c) / prop.h,
        sh=math.log(gt.h / prop.h),
        sw=math.log(gt.w / prop.w),
        otheta=wrap_half_pi(gt.theta - prop.theta),
    )


def decode_local(prop: RotatedBox, t: LocalTarget) -> RotatedBox:
    """Inverse of encode_local; the decoded angle is wrapped to (-pi/2, pi/2]."""
    c = math.cos(prop.theta)
    s = math.sin(prop.theta)
    gx = t.lx * prop.w
    gy = t.ly * prop.h
    sh = min(max(t.sh, -MAX_LOG_RATIO), MAX_LOG_RATIO)
    sw = min(max(t.sw, -MAX_LOG_RATIO), MAX_LOG_RATIO)
    return RotatedBox(
        cx=prop.cx + c * gx - s * gy,
        cy=prop.cy + s * gx + c * gy,
        w=prop.w * math.exp(sw),
        h=prop.h * math.exp(sh),
        theta=wrap_half_pi(prop.theta + t.otheta),
    )
