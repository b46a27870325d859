"""Segmentation losses on logits. Each returns ``(value, d value / d logits)``."""

from __future__ import annotations

import numpy as np

from radseg.errors import ShapeMismatch
from radseg.nn.layers import sigmoid

DICE_SMOOTH = 1.0
HUBER_DELTA = 1.0


def _check(logits, targets):
    if logits.shape != targets.shape:
        raise ShapeMismatch(f"logits {logits.shape} vs targets {targets.shape}")


def bce_with_logits(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy in the form max(z,0) - z*y + log(1 + e^-|z|)."""
    _check(logits, targets)
    z = logits
    y = targets.astype(z.dtype, copy=False)
    per = np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))
    grad = (sigmoid(z) - y) / z.size
    return float(per.mean(dtype=np.float64)), grad


def dice_loss(logits: np.ndarray, targets: np.ndarray, smooth: float = DICE_SMOOTH) -> tuple[float, np.ndarray]:
    """Soft Dice loss on sigmoid probabilities.

    Computed per (batch, channel) row along the length axis and averaged over
    rows; an empty target with an all-negative prediction scores ~0 loss.
    """
    _check(logits, targets)
    p = sigmoid(logits)
    y = targets.astype(p.dtype, copy=False)
    inter = (p * y).sum(axis=-1, keepdims=True)
    denom = p.sum(axis=-1, keepdims=True) + y.sum(axis=-1, keepdims=True) + smooth
    num = 2 * inter + smooth
    per_row = 1 - num / denom
    rows = per_row.size
    # d(1 - num/denom)/dp = -(2y*denom - num)/denom^2
    dp = -(2 * y * denom - num) / (denom * denom) / rows
    grad = dp * p * (1 - p)
    return float(per_row.mean(dtype=np.float64)), grad.astype(logits.dtype, copy=False)


def huber_loss(logits: np.ndarray, targets: np.ndarray, delta: float = HUBER_DELTA) -> tuple[float, np.ndarray]:
    """Mean Huber loss on the residual sigmoid(z) - y."""
    _check(logits, targets)
    p = sigmoid(logits)
    r = p - targets.astype(p.dtype, copy=False)
    small = np.abs(r) <= delta
    per = np.where(small, 0.5 * r * r, delta * (np.abs(r) - 0.5 * delta))
    dr = np.where(small, r, delta * np.sign(r)) / r.size
    grad = dr * p * (1 - p)
    return float(per.mean(dtype=np.float64)), grad.astype(logits.dtype, copy=False)


LOSSES = {"bce_logits": bce_with_logits, "bce": bce_with_logits, "dice": dice_loss, "huber": huber_loss}


def loss(kind: str, logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    try:
        fn = LOSSES[kind]
    except KeyError:
        raise ValueError(f"unknown loss {kind!r}; choose from {sorted(LOSSES)}") from None
    return fn(logits, targets)
