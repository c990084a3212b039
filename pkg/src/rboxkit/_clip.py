"""Convex polygon clipping kernel shared by rotated IoU and NMS.

Sutherland-Hodgman clipping of one convex quad against another plus a
shoelace area, JIT-compiled because it sits on the hot path of pairwise
IoU, NMS and assignment. Compiled with default (strict IEEE) semantics,
no fastmath, so results are reproducible across runs and platforms.
"""

import numpy as np
from numba import njit

# Intersection areas below this (squared pixels) are treated as zero;
# also the tolerance for the point-inside-halfplane test.
AREA_EPS = 1e-9


@njit(cache=True)
def polygon_area(poly, n):
    """Shoelace area of the first n vertices of poly (k, 2)."""
    s = 0.0
    for i in range(n):
        j = (i + 1) % n
        s += poly[i, 0] * poly[j, 1] - poly[j, 0] * poly[i, 1]
    return abs(s) * 0.5


@njit(cache=True)
def quad_intersection_area(qa, qb):
    """Intersection area of two convex quads given as (4, 2) vertex arrays.

    Vertices must be in consistent positive (counter-clockwise in raw
    coordinate algebra) order, which to_vertices guarantees for boxes.
    """
    # Clip qa successively against each edge of qb. The intersection of
    # two convex quads has at most 8 vertices; 16 leaves headroom for
    # duplicates introduced at touching edges.
    poly = np.empty((16, 2))
    out = np.empty((16, 2))
    n = 4
    for i in range(4):
        poly[i, 0] = qa[i, 0]
        poly[i, 1] = qa[i, 1]

    for e in range(4):
        if n == 0:
            return 0.0
        c1x = qb[e, 0]
        c1y = qb[e, 1]
        c2x = qb[(e + 1) % 4, 0]
        c2y = qb[(e + 1) % 4, 1]
        ex = c2x - c1x
        ey = c2y - c1y

        m = 0
        sx = poly[n - 1, 0]
        sy = poly[n - 1, 1]
        ds = ex * (sy - c1y) - ey * (sx - c1x)
        side_s = ds >= -AREA_EPS
        for k in range(n):
            px = poly[k, 0]
            py = poly[k, 1]
            dp = ex * (py - c1y) - ey * (px - c1x)
            side_p = dp >= -AREA_EPS
            if side_p != side_s:
                # Segment crosses the clip line; dp != ds by construction.
                t = ds / (ds - dp)
                out[m, 0] = sx + t * (px - sx)
                out[m, 1] = sy + t * (py - sy)
                m += 1
            if side_p:
                out[m, 0] = px
                out[m, 1] = py
                m += 1
            sx = px
            sy = py
            ds = dp
            side_s = side_p
        n = m
        for k in range(n):
            poly[k, 0] = out[k, 0]
            poly[k, 1] = out[k, 1]

    if n < 3:
        return 0.0
    area = polygon_area(poly, n)
    if area < AREA_EPS:
        return 0.0
    return area


@njit(cache=True)
def iou_from_quads(qa, qb, area_a, area_b):
    """IoU of two convex quads with precomputed areas, clamped to [0, 1]."""
    inter = quad_intersection_area(qa, qb)
    if inter <= 0.0:
        return 0.0
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    iou = inter / union
    if iou > 1.0:
        return 1.0
    return iou
