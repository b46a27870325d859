"""Mask metrics with skip rules for empty cases.

F1 is micro-averaged over every (channel, sample) position and is skipped
(``None``) when an example has no positives in either mask. Dice and IoU are
computed per channel; a channel that is empty in both masks is skipped (NaN)
and the example score is the mean over the remaining channels.
"""

from __future__ import annotations

import numpy as np

from radseg.errors import ShapeMismatch

THRESHOLD = 0.5


def binarize(probabilities: np.ndarray, threshold: float = THRESHOLD) -> np.ndarray:
    """1 where p >= threshold; the boundary counts as positive."""
    return (np.asarray(probabilities) >= threshold).astype(np.uint8)


def _pair(pred, gt):
    pred = np.asarray(pred).astype(bool)
    gt = np.asarray(gt).astype(bool)
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"prediction {pred.shape} vs ground truth {gt.shape}")
    if pred.ndim == 1:
        pred, gt = pred[None], gt[None]
    return pred, gt


def confusion_counts(pred, gt) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-channel (TP, FP, FN, TN) counts."""
    pred, gt = _pair(pred, gt)
    tp = np.sum(pred & gt, axis=-1)
    fp = np.sum(pred & ~gt, axis=-1)
    fn = np.sum(~pred & gt, axis=-1)
    tn = np.sum(~pred & ~gt, axis=-1)
    return tp, fp, fn, tn


def metric_f1(pred, gt, average: str = "micro") -> float | None:
    tp, fp, fn, _ = confusion_counts(pred, gt)
    if average == "micro":
        tp, fp, fn = tp.sum(), fp.sum(), fn.sum()
        denom = 2 * tp + fp + fn
        return None if denom == 0 else float(2 * tp / denom)
    if average == "macro":
        denom = 2 * tp + fp + fn
        keep = denom > 0
        if not keep.any():
            return None
        return float(np.mean(2 * tp[keep] / denom[keep]))
    raise ValueError(f"unknown average {average!r}")


def metric_dice_iou(pred, gt) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel Dice and IoU arrays, NaN where both masks are empty."""
    pred, gt = _pair(pred, gt)
    inter = np.sum(pred & gt, axis=-1).astype(np.float64)
    size_p = pred.sum(axis=-1)
    size_g = gt.sum(axis=-1)
    union = np.sum(pred | gt, axis=-1).astype(np.float64)
    skip = union == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        dice = np.where(skip, np.nan, 2 * inter / (size_p + size_g))
        iou = np.where(skip, np.nan, inter / union)
    return dice, iou


def example_scores(pred, gt, f1_average: str = "micro") -> dict[str, float | None]:
    dice, iou = metric_dice_iou(pred, gt)
    keep = ~np.isnan(dice)
    return {
        "f1": metric_f1(pred, gt, f1_average),
        "dice": float(dice[keep].mean()) if keep.any() else None,
        "iou": float(iou[keep].mean()) if keep.any() else None,
    }


def confusion_labels(pred, gt) -> np.ndarray:
    """Per-position label array: 0=TN, 1=TP, 2=FP, 3=FN."""
    pred, gt = _pair(pred, gt)
    labels = np.zeros(pred.shape, dtype=np.uint8)
    labels[pred & gt] = 1
    labels[pred & ~gt] = 2
    labels[~pred & gt] = 3
    return labels


CONFUSION_NAMES = ("TN", "TP", "FP", "FN")
