"""Dense feature-map kernels: rotated RoI align and center pooling.

Feature maps are (H, W, C) arrays, channel-last, with the value at row i,
column j living at continuous coordinate (x=j, y=i). Sampling outside the
map reads zeros. All math runs in float64; per-bin accumulation order is
fixed so results are bit-reproducible run to run.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .geom import RotatedBox


@dataclass(frozen=True)
class RRoiAlignConfig:
    """Output grid side k and sampling points per bin side ks."""

    k: int = 7
    ks: int = 2

    def __post_init__(self):
        if self.k < 1 or self.ks < 1:
            raise ConfigError(f"k and ks must be >= 1: k={self.k}, ks={self.ks}")


def _as_fmap(f) -> np.ndarray:
    a = np.asarray(f, dtype=np.float64)
    if a.ndim != 3:
        raise ShapeError(f"feature map must be (H, W, C), got shape {a.shape}")
    return a


def _bilinear_many(f: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Zero-padded bilinear interpolation of (n,) coordinates; returns (n, C)."""
    height, width, _ = f.shape
    x0 = np.floor(x)
    y0 = np.floor(y)
    wx1 = x - x0
    wy1 = y - y0
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)

    acc = None
    for yy, wy in ((y0, 1.0 - wy1), (y0 + 1, wy1)):
        for xx, wx in ((x0, 1.0 - wx1), (x0 + 1, wx1)):
            valid = (yy >= 0) & (yy < height) & (xx >= 0) & (xx < width)
            vals = f[yy.clip(0, height - 1), xx.clip(0, width - 1)]
            term = (wy * wx * valid)[:, None] * vals
            acc = term if acc is None else acc + term
    return acc


def bilinear_sample(f, x: float, y: float) -> np.ndarray:
    """Bilinearly interpolated feature at (x, y), one value per channel.

    Exact at integer grid coordinates; coordinates beyond one pixel outside
    the map contribute nothing (zero padding).
    """
    fm = _as_fmap(f)
    return _bilinear_many(fm, np.array([float(x)]), np.array([float(y)]))[0]


def local_to_global(b: RotatedBox, xl: float, yl: float):
    """Map a box-local coordinate to the global frame.

    The local origin sits at the box corner: (w/2, h/2) maps to the center.
    """
    c = math.cos(b.theta)
    s = math.sin(b.theta)
    dx = xl - b.w / 2.0
    dy = yl - b.h / 2.0
    return (b.cx + c * dx - s * dy, b.cy + s * dx + c * dy)


def rroi_align(f, b: RotatedBox, cfg: RRoiAlignConfig = RRoiAlignConfig()) -> np.ndarray:
    """Average-pooled bilinear samples of a rotated box, on a k x k grid.

    Bin (i, j) covers rows i (the h axis) and columns j (the w axis) of the
    box's local frame; each bin averages ks*ks samples placed at the bin's
    regular sub-grid centers and mapped through local_to_global. Box
    coordinates must already be expressed at feature-map scale (divide by
    the level stride before calling).
    """
    fm = _as_fmap(f)
    k, ks = cfg.k, cfg.ks
    # local sampling offsets: (index*ks + sub + 0.5) * side / (k*ks)
    grid = np.arange(k)[:, None] * ks + (np.arange(ks)[None, :] + 0.5)
    xs = grid * (b.w / (k * ks))  # (k, ks) along the w axis
    ys = grid * (b.h / (k * ks))  # (k, ks) along the h axis

    xl = np.broadcast_to(xs[None, :, None, :], (k, k, ks, ks))
    yl = np.broadcast_to(ys[:, None, :, None], (k, k, ks, ks))
    c = math.cos(b.theta)
    s = math.sin(b.theta)
    dx = xl - b.w / 2.0
    dy = yl - b.h / 2.0
    xg = b.cx + c * dx - s * dy
    yg = b.cy + s * dx + c * dy

    vals = _bilinear_many(fm, xg.ravel(), yg.ravel())
    ch = fm.shape[2]
    return vals.reshape(k, k, ks, ks, ch).mean(axis=(2, 3))


def center_pool(f) -> np.ndarray:
    """Per-position sum of the row-wise and column-wise channel maxima."""
    fm = _as_fmap(f)
    row_max = fm.max(axis=1)  # (H, C)
    col_max = fm.max(axis=0)  # (W, C)
    return row_max[:, None, :] + col_max[None, :, :]
