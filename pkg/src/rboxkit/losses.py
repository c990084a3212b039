"""Reference loss functions with values and analytic gradients.

These are plain scalar implementations meant as numeric ground truth, not
a training path. Reductions use math.fsum, so batch losses are exactly
permutation-invariant.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError

PROB_EPS = 1e-12


@dataclass(frozen=True)
class LossConfig:
    """Balance weights of the two regression terms."""

    lambda1: float = 1.0
    lambda2: float = 1.0

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ConfigError("loss weights must be non-negative")


def smooth_l1(x: float):
    """Smooth L1 of a scalar: 0.5 x^2 inside |x| < 1, |x| - 0.5 outside.

    Returns (value, gradient); the gradient takes the subgradient +-1 at
    the |x| = 1 joints, where both value branches meet continuously.
    """
    if abs(x) < 1.0:
        return 0.5 * x * x, x
    return abs(x) - 0.5, math.copysign(1.0, x)


def bce(p: float, pstar: int):
    """Binary cross entropy and its gradient with respect to p.

    p is clamped to [PROB_EPS, 1 - PROB_EPS] before the logs.
    """
    if pstar not in (0, 1):
        raise ConfigError(f"pstar must be 0 or 1: {pstar}")
    p = min(max(p, PROB_EPS), 1.0 - PROB_EPS)
    value = -(pstar * math.log(p) + (1 - pstar) * math.log(1.0 - p))
    grad = -pstar / p + (1 - pstar) / (1.0 - p)
    return value, grad


def aorpn_loss(scores, labels, u, ustar, v, vstar, cfg: LossConfig = LossConfig()):
    """Joint proposal loss: mean BCE plus two gated smooth-L1 terms.

    The classification term averages over all sampled entries (N_cls);
    each regression term sums element-wise smooth L1 over the positive
    entries only and divides by the positive count (N_reg). Returns
    (total, cls_term, reg_u_term, reg_v_term) with the regression terms
    already carrying their lambda weights; with no positives they are 0.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    u = np.asarray(u, dtype=np.float64)
    ustar = np.asarray(ustar, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    vstar = np.asarray(vstar, dtype=np.float64)
    n = scores.shape[0]
    if n == 0:
        raise ShapeError("need at least one sampled entry")
    for name, arr, shape in (
        ("labels", labels, (n,)),
        ("u", u, (n, 4)),
        ("ustar", ustar, (n, 4)),
        ("v", v, (n, 4)),
        ("vstar", vstar, (n, 4)),
    ):
        if arr.shape != shape:
            raise ShapeError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all((labels == 0) | (labels == 1)):
        raise ConfigError("labels must be 0 or 1 (sampled entries only)")

    cls_term = math.fsum(bce(float(p), int(l))[0] for p, l in zip(scores, labels)) / n

    pos = np.flatnonzero(labels == 1)
    if pos.size == 0:
        reg_u = 0.0
        reg_v = 0.0
    else:
        reg_u = cfg.lambda1 * math.fsum(
            smooth_l1(float(ustar[i, j] - u[i, j]))[0] for i in pos for j in range(4)
        ) / pos.size
        reg_v = cfg.lambda2 * math.fsum(
            smooth_l1(float(vstar[i, j] - v[i, j]))[0] for i in pos for j in range(4)
        ) / pos.size
    return cls_term + reg_u + reg_v, cls_term, reg_u, reg_v
