"""ROI geometry: bounding boxes, square placement, carving, recomposition.

The ROI is never resampled. A fixed-size square is placed over the
bounding-box center (shifted, not shrunk, to stay in bounds) so that
carve/recompose stay pixel-exact inverses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryMismatch, SquareTooLarge
from .imaging import BinaryMask, SliceImage


class BboxTruncatedWarning(UserWarning):
    """The tumor bounding box exceeds the configured square size."""


@dataclass(frozen=True)
class BoundingBox:
    """Inclusive pixel bounds of a mask's set region."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self) -> None:
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise GeometryMismatch(f"inverted bounding box {self}")
        if min(self.x_min, self.y_min) < 0:
            raise GeometryMismatch(f"negative bounding box {self}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1


@dataclass(frozen=True)
class SquareRect:
    """Axis-aligned square placement in slice coordinates."""

    x0: int
    y0: int
    side: int


@dataclass
class RoiRecord:
    """Per-slice ROI placement; the recomposition contract."""

    slice_index: int
    present: bool
    rect: SquareRect
    source_bbox: BoundingBox | None = None

    def __post_init__(self) -> None:
        if not self.present and self.source_bbox is not None:
            raise GeometryMismatch("absent ROI cannot carry a source bbox")


def mask_bbox(mask: BinaryMask) -> BoundingBox | None:
    """Tight min/max over set pixels; None for an empty mask."""
    ys, xs = np.nonzero(mask.bits)
    if xs.size == 0:
        return None
    return BoundingBox(
        x_min=int(xs.min()),
        y_min=int(ys.min()),
        x_max=int(xs.max()),
        y_max=int(ys.max()),
    )


def place_square(
    bbox: BoundingBox, side: int, image_size: tuple[int, int]
) -> SquareRect:
    """Center a side x side square on the bbox, clamped inside the image.

    ``image_size`` is (width, height). The square is shifted, never
    shrunk; a bbox larger than the square is legal (center coverage).
    """
    width, height = image_size
    if side > width or side > height:
        raise SquareTooLarge(f"side {side} exceeds image {width}x{height}")
    if side <= 0 or side % 2 != 0:
        raise ValueError(f"square side must be a positive even number, got {side}")
    cx = (bbox.x_min + bbox.x_max) // 2
    cy = (bbox.y_min + bbox.y_max) // 2
    x0 = min(max(cx - side // 2, 0), width - side)
    y0 = min(max(cy - side // 2, 0), height - side)
    return SquareRect(x0=x0, y0=y0, side=side)


def _check_rect(rect: SquareRect, width: int, height: int) -> None:
    if (
        rect.x0 < 0
        or rect.y0 < 0
        or rect.x0 + rect.side > width
        or rect.y0 + rect.side > height
    ):
        raise GeometryMismatch(f"rect {rect} outside {width}x{height} slice")


def carve(slice_img: SliceImage, rect: SquareRect) -> tuple[SliceImage, SliceImage]:
    """Split a slice into (roi_patch, background-with-ROI-zeroed)."""
    _check_rect(rect, slice_img.width, slice_img.height)
    ys = slice(rect.y0, rect.y0 + rect.side)
    xs = slice(rect.x0, rect.x0 + rect.side)
    patch = SliceImage.from_array(slice_img.samples[ys, xs].copy())
    background = slice_img.samples.copy()
    background[ys, xs] = 0
    return patch, SliceImage.from_array(background)


def recompose(
    roi_patch: SliceImage, background: SliceImage, rect: SquareRect
) -> SliceImage:
    """Paste the ROI patch back over the background; inverse of carve."""
    if roi_patch.width != rect.side or roi_patch.height != rect.side:
        raise GeometryMismatch(
            f"patch {roi_patch.width}x{roi_patch.height} != rect side {rect.side}"
        )
    _check_rect(rect, background.width, background.height)
    out = background.samples.copy()
    out[rect.y0 : rect.y0 + rect.side, rect.x0 : rect.x0 + rect.side] = (
        roi_patch.samples
    )
    return SliceImage.from_array(out)
