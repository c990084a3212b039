"""Independent reference implementations used to check the library.

Everything here is deliberately written the slow, obvious way (loops,
Monte Carlo, enumeration) and never calls into the code paths it is used
to verify.
"""

import math

import numpy as np


def points_in_rbox(pts, cx, cy, w, h, theta):
    """Boolean mask: which (n, 2) points fall inside a rotated box."""
    c = math.cos(theta)
    s = math.sin(theta)
    dx = pts[:, 0] - cx
    dy = pts[:, 1] - cy
    # rotate into the box frame
    xl = c * dx + s * dy
    yl = -s * dx + c * dy
    return (np.abs(xl) <= w / 2.0) & (np.abs(yl) <= h / 2.0)


def mc_rotated_iou(box_a, box_b, n_samples, rng):
    """Monte-Carlo IoU estimate over the pair's joint bounding box.

    box_a/box_b are (cx, cy, w, h, theta) tuples.
    """

    def extent(cx, cy, w, h, theta):
        c = abs(math.cos(theta))
        s = abs(math.sin(theta))
        ex = (w * c + h * s) / 2.0
        ey = (w * s + h * c) / 2.0
        return cx - ex, cx + ex, cy - ey, cy + ey

    ax1, ax2, ay1, ay2 = extent(*box_a)
    bx1, bx2, by1, by2 = extent(*box_b)
    x1, x2 = min(ax1, bx1), max(ax2, bx2)
    y1, y2 = min(ay1, by1), max(ay2, by2)
    pts = np.empty((n_samples, 2))
    pts[:, 0] = rng.uniform(x1, x2, n_samples)
    pts[:, 1] = rng.uniform(y1, y2, n_samples)
    in_a = points_in_rbox(pts, *box_a)
    in_b = points_in_rbox(pts, *box_b)
    n_inter = int(np.count_nonzero(in_a & in_b))
    n_union = int(np.count_nonzero(in_a | in_b))
    if n_union == 0:
        return 0.0
    return n_inter / n_union


def enum_min_angle_box(vertices):
    """Canonical box from a rectangle's vertices by enumerating vertex orders.

    Tries all four cyclic relabelings v_k, v_k+1, v_k+2, v_k+3, derives
    (w, h, theta) of each from edge lengths and the first-edge direction,
    and returns the (cx, cy, w, h, theta) with minimum |theta|. Ties go to
    the non-negative angle.
    """
    vs = [tuple(v) for v in vertices]
    cx = sum(v[0] for v in vs) / 4.0
    cy = sum(v[1] for v in vs) / 4.0
    best = None
    for k in range(4):
        a = vs[k]
        b = vs[(k + 1) % 4]
        c = vs[(k + 2) % 4]
        theta = math.atan2(b[1] - a[1], b[0] - a[0])
        # first-edge angle folded to (-pi/2, pi/2]
        while theta > math.pi / 2:
            theta -= math.pi
        while theta <= -math.pi / 2:
            theta += math.pi
        w = math.hypot(b[0] - a[0], b[1] - a[1])
        h = math.hypot(c[0] - b[0], c[1] - b[1])
        cand = (cx, cy, w, h, theta)
        if best is None:
            best = cand
        elif abs(theta) < abs(best[4]) - 1e-15:
            best = cand
        elif abs(abs(theta) - abs(best[4])) <= 1e-15 and theta > best[4]:
            best = cand
    return best


def aligned_roi_align(fmap, x1, y1, x2, y2, k, ks):
    """Plain axis-aligned RoI Align with average pooling, loop form.

    fmap is (H, W, C); the RoI is the rectangle [x1, x2] x [y1, y2].
    Returns a (k, k, C) array.
    """
    H, W, C = fmap.shape
    out = np.zeros((k, k, C))
    bin_w = (x2 - x1) / k
    bin_h = (y2 - y1) / k
    for i in range(k):
        for j in range(k):
            acc = np.zeros(C)
            for iy in range(ks):
                for ix in range(ks):
                    y = y1 + (i + (iy + 0.5) / ks) * bin_h
                    x = x1 + (j + (ix + 0.5) / ks) * bin_w
                    acc += bilinear_at(fmap, x, y)
            out[i, j] = acc / (ks * ks)
    return out


def bilinear_at(fmap, x, y):
    """Bilinear interpolation with zero padding, loop form; returns (C,)."""
    H, W, C = fmap.shape
    x0 = math.floor(x)
    y0 = math.floor(y)
    val = np.zeros(C)
    for yy, wy in ((y0, 1.0 - (y - y0)), (y0 + 1, y - y0)):
        for xx, wx in ((x0, 1.0 - (x - x0)), (x0 + 1, x - x0)):
            if 0 <= yy < H and 0 <= xx < W and wy != 0.0 and wx != 0.0:
                val += wy * wx * fmap[yy, xx]
    return val


def center_pool_loops(fmap):
    """Row-max + column-max center pooling, triple-loop form."""
    H, W, C = fmap.shape
    out = np.zeros_like(fmap)
    for r in range(H):
        for c in range(W):
            for ch in range(C):
                row_max = max(fmap[r, cc, ch] for cc in range(W))
                col_max = max(fmap[rr, c, ch] for rr in range(H))
                out[r, c, ch] = row_max + col_max
    return out


def brute_force_nms(iou_fn, boxes, scores, class_ids, iou_thresh):
    """Greedy NMS from a fully materialized IoU matrix.

    iou_fn(a, b) supplies the overlap measure so this stays a pure
    procedure oracle. Returns kept indices in keep order.
    """
    n = len(boxes)
    iou = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            v = iou_fn(boxes[i], boxes[j])
            iou[i, j] = v
            iou[j, i] = v
    order = sorted(range(n), key=lambda i: (-scores[i], i))
    kept = []
    for i in order:
        ok = True
        for j in kept:
            if class_ids[j] == class_ids[i] and iou[i, j] >= iou_thresh:
                ok = False
                break
        if ok:
            kept.append(i)
    return kept


def greedy_match_flags(iou_fn, det_boxes, gt_boxes, gt_difficult, iou_thresh, ignore_difficult):
    """TP/FP/ignored flags for score-sorted detections, exhaustive form.

    Returns a list with 1 for TP, 0 for FP, -1 for a detection absorbed
    by a difficult ground truth.
    """
    matched = [False] * len(gt_boxes)
    flags = []
    for db in det_boxes:
        best_iou = -1.0
        best_j = -1
        for j, gb in enumerate(gt_boxes):
            if matched[j]:
                continue
            v = iou_fn(db, gb)
            if v > best_iou:
                best_iou = v
                best_j = j
        if best_j >= 0 and best_iou >= iou_thresh:
            matched[best_j] = True
            if ignore_difficult and gt_difficult[best_j]:
                flags.append(-1)
            else:
                flags.append(1)
        else:
            flags.append(0)
    return flags


def central_difference(f, x, step=1e-5):
    return (f(x + step) - f(x - step)) / (2.0 * step)


def hausdorff(pts_a, pts_b):
    """Symmetric Hausdorff distance between two small point sets."""
    a = np.asarray(pts_a, dtype=float)
    b = np.asarray(pts_b, dtype=float)
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))
    return max(d.min(axis=1).max(), d.min(axis=0).max())
