"""Region similarity J, boundary accuracy F, and their mean J&F.

J is plain intersection-over-union. F extracts boundary pixels
(foreground pixels with at least one 4-neighbor in the background,
where the image border counts as background) and scores boundary
precision/recall with matches allowed within a pixel tolerance. The
default tolerance follows the common video-segmentation convention of
0.75% of the image diagonal, rounded up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import InputError


def _as_binary(mask) -> np.ndarray:
    arr = np.asarray(mask)
    if arr.dtype != bool:
        arr = arr > 0.5
    return arr


def default_tolerance(shape) -> int:
    """ceil(0.0075 * image diagonal) in pixels."""
    h, w = shape
    return int(math.ceil(0.0075 * math.hypot(h, w)))


def region_similarity_j(pred, gt) -> float:
    """Intersection over union; both masks empty counts as 1."""
    pred, gt = _as_binary(pred), _as_binary(gt)
    if pred.shape != gt.shape:
        raise InputError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    union = np.logical_or(pred, gt).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(pred, gt).sum() / union)


def boundary_pixels(mask) -> np.ndarray:
    """Foreground pixels with a background 4-neighbor (border is background)."""
    mask = _as_binary(mask)
    padded = np.pad(mask, 1, mode="constant", constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return mask & ~interior


def boundary_accuracy_f(pred, gt, tolerance: int | None = None) -> float:
    """F-measure over boundary matching within ``tolerance`` pixels."""
    pred, gt = _as_binary(pred), _as_binary(gt)
    if pred.shape != gt.shape:
        raise InputError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    if tolerance is None:
        tolerance = default_tolerance(pred.shape)
    pb = boundary_pixels(pred)
    gb = boundary_pixels(gt)
    if not pb.any() and not gb.any():
        return 1.0
    if not pb.any() or not gb.any():
        return 0.0
    dist_to_gt = ndimage.distance_transform_edt(~gb)
    dist_to_pred = ndimage.distance_transform_edt(~pb)
    precision = float((dist_to_gt[pb] <= tolerance).mean())
    recall = float((dist_to_pred[gb] <= tolerance).mean())
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def jf_score(js, fs) -> tuple[float, float, float]:
    """(mean J, mean F, J&F) over per-frame scores."""
    js, fs = list(js), list(fs)
    if not js or not fs:
        raise InputError("jf_score needs at least one frame")
    mean_j = float(np.mean(js))
    mean_f = float(np.mean(fs))
    return mean_j, mean_f, (mean_j + mean_f) / 2.0


# ---------------------------------------------------------------------
# report
# ---------------------------------------------------------------------

@dataclass
class ClipMetrics:
    """Per-(clip, query) scores."""

    clip_id: int
    query: str
    frame_j: list[float] = field(default_factory=list)
    frame_f: list[float] = field(default_factory=list)

    @property
    def mean_j(self) -> float:
        return float(np.mean(self.frame_j))

    @property
    def mean_f(self) -> float:
        return float(np.mean(self.frame_f))

    @property
    def jf(self) -> float:
        return (self.mean_j + self.mean_f) / 2.0


def format_report(clips: list[ClipMetrics]) -> str:
    """Plain-text key-value report with a stable field order.

    One ``record`` line per frame, one ``aggregate`` line per clip, and
    a final ``summary`` line; floats are fixed to 9 decimals so that
    identical runs produce identical bytes.
    """
    if not clips:
        raise InputError("report needs at least one clip")
    lines = ["# refvos metrics v1"]
    for c in clips:
        for t, (j, f) in enumerate(zip(c.frame_j, c.frame_f)):
            lines.append(
                f"record clip={c.clip_id:04d} frame={t:02d} j={j:.9f} f={f:.9f}")
        lines.append(
            f"aggregate clip={c.clip_id:04d} query={c.query} frames={len(c.frame_j)}"
            f" mean_j={c.mean_j:.9f} mean_f={c.mean_f:.9f} jf={c.jf:.9f}")
    mean_j = float(np.mean([c.mean_j for c in clips]))
    mean_f = float(np.mean([c.mean_f for c in clips]))
    lines.append(
        f"summary items={len(clips)} mean_j={mean_j:.9f} mean_f={mean_f:.9f}"
        f" jf={(mean_j + mean_f) / 2.0:.9f}")
    return "\n".join(lines) + "\n"


def summarize(clips: list[ClipMetrics]) -> tuple[float, float, float]:
    """(mean J, mean F, J&F) over clip aggregates."""
    if not clips:
        raise InputError("summary needs at least one clip")
    mean_j = float(np.mean([c.mean_j for c in clips]))
    mean_f = float(np.mean([c.mean_f for c in clips]))
    return mean_j, mean_f, (mean_j + mean_f) / 2.0
