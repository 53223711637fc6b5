"""Precision and success measures over tracked box sequences.

Precision is the fraction of frames whose center error falls within a
pixel threshold, reported on the integer grid 0..50 and summarized at the
common 20 px threshold.  Success is the fraction of frames whose IoU
strictly exceeds an overlap threshold, reported on the 101-point grid
0.00..1.00 and summarized by the mean over that grid (AUC).  Both endpoint
conventions are fixed here so scores are reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PRECISION_THRESHOLDS = np.arange(0, 51, dtype=float)
SUCCESS_THRESHOLDS = np.linspace(0.0, 1.0, 101)
PRECISION_SCORE_PX = 20


@dataclass(frozen=True)
class TrackResult:
    """Predicted and ground-truth boxes with per-frame timing."""

    boxes: tuple
    gt: tuple
    timings: tuple
    channels_used: int = 0

    def __post_init__(self):
        boxes = tuple(tuple(float(v) for v in b) for b in self.boxes)
        gt = tuple(tuple(float(v) for v in b) for b in self.gt)
        timings = tuple(float(t) for t in self.timings)
        if not (len(boxes) == len(gt) == len(timings)):
            raise ValueError(
                f"lengths differ: {len(boxes)} boxes, {len(gt)} gt, {len(timings)} timings"
            )
        if not boxes:
            raise ValueError("empty result")
        if boxes[0] != gt[0]:
            raise ValueError("first predicted box must equal the first ground-truth box")
        object.__setattr__(self, "boxes", boxes)
        object.__setattr__(self, "gt", gt)
        object.__setattr__(self, "timings", timings)

    @property
    def n_frames(self) -> int:
        return len(self.boxes)

    @property
    def fps(self) -> float:
        total = sum(self.timings)
        return self.n_frames / total if total > 0 else float("inf")


def center_error(a, b) -> float:
    """Euclidean distance between box centers; boxes are (x, y, w, h)."""
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    return float(np.hypot((ax + aw / 2) - (bx + bw / 2), (ay + ah / 2) - (by + bh / 2)))


def iou(a, b) -> float:
    """Intersection over union of two (x, y, w, h) boxes; 0 when disjoint."""
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    ix = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
    iy = max(0.0, min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def precision_curve(result: TrackResult, thresholds=PRECISION_THRESHOLDS):
    """Fraction of frames with center error <= threshold, per threshold.

    Returns (curve, score) with the score taken at the 20 px threshold.
    """
    thresholds = np.asarray(thresholds, dtype=float)
    errors = np.array([center_error(p, g) for p, g in zip(result.boxes, result.gt)])
    curve = (errors[None, :] <= thresholds[:, None]).mean(axis=1)
    score_idx = int(np.argmin(np.abs(thresholds - PRECISION_SCORE_PX)))
    return curve, float(curve[score_idx])


def success_curve(result: TrackResult, thresholds=SUCCESS_THRESHOLDS):
    """Fraction of frames with IoU strictly above threshold, plus the AUC."""
    thresholds = np.asarray(thresholds, dtype=float)
    overlaps = np.array([iou(p, g) for p, g in zip(result.boxes, result.gt)])
    curve = (overlaps[None, :] > thresholds[:, None]).mean(axis=1)
    return curve, float(curve.mean())
