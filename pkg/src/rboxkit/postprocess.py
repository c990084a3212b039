"""Score filtering, rotated (polygon) NMS and the proposal decode chain."""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._clip import iou_from_quads, polygon_area
from .errors import ConfigError, InvalidBoxError, InvalidQuadError, ShapeError
from .geom import RotatedBox, _box_key, _vertices, normalize_angle
from .targets import HorizontalDelta, TransformParams, decode_hdelta, decode_transform


@dataclass(frozen=True)
class Detection:
    """A scored, class-labeled rotated box."""

    box: RotatedBox
    score: float
    class_id: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.score) and 0.0 <= self.score <= 1.0):
            raise InvalidBoxError(f"score must be finite in [0, 1]: {self.score}")


@dataclass(frozen=True)
class ProposalConfig:
    """Knobs of the proposal decode chain."""

    score_thresh: float = 0.0
    pre_nms_topk: int = 6000
    nms_iou: float = 0.7
    post_nms_topk: int = 2000


def rotated_nms(dets: Sequence[Detection], iou_thresh: float, class_agnostic: bool = False) -> list:
    """Greedy non-maximum suppression under rotated IoU.

    Detections are visited by descending score (ties by input index); one is
    kept iff its IoU with every kept detection of the same class is strictly
    below iou_thresh. Returns kept indices in keep order. Boxes of different
    classes never suppress each other unless class_agnostic is set.
    """
    if not (0.0 <= iou_thresh <= 1.0):
        raise ConfigError(f"iou_thresh must lie in [0, 1]: {iou_thresh}")
    n = len(dets)
    if n == 0:
        return []

    verts = np.stack([_vertices(d.box) for d in dets])
    areas = np.array([polygon_area(v, 4) for v in verts])
    keys = [_box_key(d.box) for d in dets]
    classes = np.array([d.class_id for d in dets]) if not class_agnostic else np.zeros(n, dtype=int)
    x1 = verts[:, :, 0].min(axis=1)
    x2 = verts[:, :, 0].max(axis=1)
    y1 = verts[:, :, 1].min(axis=1)
    y2 = verts[:, :, 1].max(axis=1)

    order = sorted(range(n), key=lambda i: (-dets[i].score, i))
    kept = []
    kept_mask = np.zeros(n, dtype=bool)
    for i in order:
        # cheap reject: same class and overlapping axis-aligned extents
        cand = kept_mask & (classes == classes[i])
        cand &= (x1 <= x2[i]) & (x2 >= x1[i]) & (y1 <= y2[i]) & (y2 >= y1[i])
        ok = True
        for j in np.flatnonzero(cand):
            # same argument ordering as geom.rotated_iou for identical bits
            if keys[j] < keys[i]:
                iou = iou_from_quads(verts[j], verts[i], areas[j], areas[i])
            else:
                iou = iou_from_quads(verts[i], verts[j], areas[i], areas[j])
            if iou >= iou_thresh:
                ok = False
                break
        if ok:
            kept.append(i)
            kept_mask[i] = True
    return kept


def filter_and_topk(dets: Sequence[Detection], score_thresh: float, k: int) -> list:
    """Drop scores <= score_thresh, sort by descending score (stable), keep k."""
    if k < 0:
        raise ConfigError(f"k must be >= 0: {k}")
    survivors = [d for d in dets if d.score > score_thresh]
    survivors.sort(key=lambda d: -d.score)
    return survivors[:k]


def proposal_pipeline(
    anchor_scores,
    hdeltas,
    tparams,
    anchors,
    cfg: ProposalConfig = ProposalConfig(),
) -> list:
    """Decode per-anchor predictions into canonical rotated proposals.

    Chain: horizontal delta decode, affine transform decode, angle
    canonicalization, score filter + pre-NMS top-k, rotated NMS, post-NMS
    truncation. Anchors whose decode degenerates are dropped.
    """
    scores = np.asarray(anchor_scores, dtype=np.float64)
    du = np.asarray(hdeltas, dtype=np.float64)
    dv = np.asarray(tparams, dtype=np.float64)
    n = len(anchors)
    if scores.shape != (n,) or du.shape != (n, 4) or dv.shape != (n, 4):
        raise ShapeError(
            f"expected scores (n,), deltas (n, 4), transforms (n, 4) for n={n}; "
            f"got {scores.shape}, {du.shape}, {dv.shape}"
        )

    dets = []
    for i in range(n):
        try:
            hbox = decode_hdelta(anchors[i], HorizontalDelta(*du[i]))
            rbox = decode_transform(hbox, TransformParams(*dv[i]))
            rbox = normalize_angle(rbox)
        except (InvalidBoxError, InvalidQuadError):
            continue
        dets.append(Detection(rbox, float(scores[i]), 0))

    dets = filter_and_topk(dets, cfg.score_thresh, cfg.pre_nms_topk)
    kept = rotated_nms(dets, cfg.nms_iou, class_agnostic=True)
    return [dets[i].box for i in kept[: cfg.post_nms_topk]]
