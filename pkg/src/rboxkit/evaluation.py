"""Rotated-box detection evaluation: greedy matching, AP and mean AP."""

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .geom import RotatedBox, rotated_iou
from .postprocess import Detection

TP = 1
FP = 0
IGNORED = -1

INTERPOLATIONS = ("allpoint", "11point")


@dataclass(frozen=True)
class EvalConfig:
    iou_thresh: float = 0.5
    interpolation: str = "allpoint"
    ignore_difficult: bool = True

    def __post_init__(self):
        if not (0.0 < self.iou_thresh <= 1.0):
            raise ConfigError(f"iou_thresh must lie in (0, 1]: {self.iou_thresh}")
        if self.interpolation not in INTERPOLATIONS:
            raise ConfigError(
                f"interpolation must be one of {INTERPOLATIONS}: {self.interpolation!r}"
            )


@dataclass(frozen=True)
class GroundTruth:
    """A ground-truth rotated box with class id and difficulty flag."""

    box: RotatedBox
    class_id: int = 0
    difficult: bool = False


@dataclass(frozen=True)
class EvalResult:
    """Per-class average precision and its mean over evaluated classes."""

    per_class_ap: dict
    mean_ap: float


def match_detections(dets: Sequence[Detection], gts: Sequence[GroundTruth], cfg: EvalConfig) -> np.ndarray:
    """TP/FP flags for score-sorted detections of a single class.

    Each detection greedily claims the unmatched ground truth of highest
    rotated IoU; it is a TP when that IoU reaches cfg.iou_thresh, else an
    FP. A match to a difficult ground truth is flagged IGNORED (neither TP
    nor FP) when cfg.ignore_difficult.
    """
    matched = np.zeros(len(gts), dtype=bool)
    flags = np.empty(len(dets), dtype=np.int8)
    for i, det in enumerate(dets):
        best_iou = -1.0
        best_j = -1
        for j, gt in enumerate(gts):
            if matched[j]:
                continue
            v = rotated_iou(det.box, gt.box)
            if v > best_iou:
                best_iou = v
                best_j = j
        if best_j >= 0 and best_iou >= cfg.iou_thresh:
            matched[best_j] = True
            if cfg.ignore_difficult and gts[best_j].difficult:
                flags[i] = IGNORED
            else:
                flags[i] = TP
        else:
            flags[i] = FP
    return flags


def average_precision(flags, n_gt: int, cfg: EvalConfig = EvalConfig()):
    """AP from ordered TP/FP flags against n_gt ground truths.

    All-point mode integrates the monotonized precision envelope over
    recall; 11-point mode averages the maximum precision at recalls
    0, 0.1, ..., 1.0. Returns None when n_gt == 0 (class undefined).
    """
    if n_gt < 0:
        raise ConfigError(f"n_gt must be >= 0: {n_gt}")
    if n_gt == 0:
        return None
    flags = np.asarray([f for f in np.asarray(flags).ravel() if f != IGNORED], dtype=np.int8)
    if flags.size == 0:
        return 0.0
    tp = np.cumsum(flags == TP)
    fp = np.cumsum(flags == FP)
    recall = tp / n_gt
    precision = tp / np.maximum(tp + fp, 1)

    if cfg.interpolation == "allpoint":
        mrec = np.concatenate(([0.0], recall, [1.0]))
        mpre = np.concatenate(([0.0], precision, [0.0]))
        for i in range(mpre.size - 1, 0, -1):
            mpre[i - 1] = max(mpre[i - 1], mpre[i])
        idx = np.flatnonzero(mrec[1:] != mrec[:-1])
        return float(np.sum((mrec[idx + 1] - mrec[idx]) * mpre[idx + 1]))

    total = 0.0
    for t in np.arange(0.0, 1.01, 0.1):
        candidates = precision[recall >= t]
        total += float(candidates.max()) if candidates.size else 0.0
    return total / 11.0


def map_evaluate(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    cfg: EvalConfig = EvalConfig(),
    class_names: Sequence[str] = None,
) -> EvalResult:
    """Per-class AP plus mean AP over classes with at least one ground truth.

    Detections whose class has no ground truth contribute to no class AP;
    they trigger a warning. class_names, when given, labels the result keys
    (falling back to the numeric class id).
    """

    def name(cid):
        if class_names is not None and 0 <= cid < len(class_names):
            return class_names[cid]
        return str(cid)

    gt_classes = sorted({g.class_id for g in gts})
    stray = sorted({d.class_id for d in dets} - set(gt_classes))
    if stray:
        warnings.warn(f"detections for classes without ground truth: {stray}")

    per_class = {}
    aps = []
    for cid in gt_classes:
        cls_dets = [d for d in dets if d.class_id == cid]
        cls_dets.sort(key=lambda d: -d.score)  # stable: ties keep input order
        cls_gts = [g for g in gts if g.class_id == cid]
        if cfg.ignore_difficult:
            n_gt = sum(1 for g in cls_gts if not g.difficult)
        else:
            n_gt = len(cls_gts)
        flags = match_detections(cls_dets, cls_gts, cfg)
        ap = average_precision(flags, n_gt, cfg)
        if ap is None:
            continue  # only difficult ground truths: class undefined
        per_class[name(cid)] = ap
        aps.append(ap)
    mean_ap = float(np.mean(aps)) if aps else 0.0
    return EvalResult(per_class_ap=per_class, mean_ap=mean_ap)
