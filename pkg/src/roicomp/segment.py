"""Mask production and evaluation without a neural network.

The baseline segmenter (threshold + largest connected component) stands
in for a learned model so the pipeline is usable out of the box; the
metric functions score any mask against any other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch
from .imaging import BinaryMask, MaskOrigin, SliceImage

# 4-connectivity: edge-adjacent pixels only.
_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass
class SegmentationMetrics:
    dice: float
    iou: float
    bce: float | None = None


def baseline_segment(
    slice_img: SliceImage, threshold: int = 128, min_component_px: int = 16
) -> BinaryMask:
    """Threshold, then keep only the largest 4-connected component.

    The component survives only if its area reaches ``min_component_px``;
    otherwise the mask is empty.
    """
    above = slice_img.samples >= threshold
    if not above.any():
        return BinaryMask.from_array(
            np.zeros_like(above), origin=MaskOrigin.BASELINE
        )
    labels, n = ndimage.label(above, structure=_CROSS)
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0  # background
    biggest = int(sizes.argmax())
    if sizes[biggest] < min_component_px:
        bits = np.zeros_like(above)
    else:
        bits = labels == biggest
    return BinaryMask.from_array(bits, origin=MaskOrigin.BASELINE)


def _overlap_counts(a: BinaryMask, b: BinaryMask) -> tuple[int, int, int]:
    if (a.width, a.height) != (b.width, b.height):
        raise DimensionMismatch(
            f"mask {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    inter = int(np.logical_and(a.bits, b.bits).sum())
    return inter, a.count, b.count


def dice(a: BinaryMask, b: BinaryMask) -> float:
    """2|A∩B| / (|A|+|B|); two empty masks score 1.0."""
    inter, na, nb = _overlap_counts(a, b)
    if na + nb == 0:
        return 1.0
    return 2.0 * inter / (na + nb)


def iou(a: BinaryMask, b: BinaryMask) -> float:
    """|A∩B| / |A∪B|; two empty masks score 1.0."""
    inter, na, nb = _overlap_counts(a, b)
    union = na + nb - inter
    if union == 0:
        return 1.0
    return inter / union


def bce_with_logits(logits: np.ndarray, target: BinaryMask) -> float:
    """Mean binary cross-entropy from raw logits, numerically stable.

    Uses max(x,0) - x*y + log(1 + exp(-|x|)) per pixel.
    """
    x = np.asarray(logits, dtype=np.float64)
    if x.shape != (target.height, target.width):
        raise DimensionMismatch(
            f"logits shape {x.shape} != ({target.height}, {target.width})"
        )
    y = target.bits.astype(np.float64)
    per_pixel = np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x)))
    return float(per_pixel.mean())
