"""Fidelity and size measurement, plus report rendering.

PSNR is region-restrictable (full frame, ROI pixels, background pixels)
so the dual-CRF trade-off is visible in one report.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyRegion,
    ZeroCompressedSize,
)
from .imaging import BinaryMask, SliceImage
from .roi import SquareRect
from .segment import SegmentationMetrics

PSNR_CAP_DB = 99.0  # exact match; finite so CSV tooling stays simple
_PEAK_TERM = 20.0 * math.log10(255.0)


def _as_array(image) -> np.ndarray:
    """Accept a SliceImage, an ndarray, or a sequence of either."""
    if isinstance(image, SliceImage):
        return image.samples.astype(np.float64)
    if isinstance(image, np.ndarray):
        return image.astype(np.float64)
    planes = [
        p.samples if isinstance(p, SliceImage) else np.asarray(p) for p in image
    ]
    return np.stack(planes).astype(np.float64)


def _region_mask(region, shape: tuple[int, ...]) -> np.ndarray:
    if isinstance(region, BinaryMask):
        sel = region.bits
    elif isinstance(region, SquareRect):
        sel = np.zeros(shape[-2:], dtype=bool)
        sel[region.y0 : region.y0 + region.side, region.x0 : region.x0 + region.side] = True
    else:
        sel = np.asarray(region, dtype=bool)
    if sel.shape == shape:
        return sel
    if sel.shape == shape[-2:] and len(shape) == 3:
        return np.broadcast_to(sel, shape)
    raise DimensionMismatch(f"region shape {sel.shape} does not fit image {shape}")


def psnr(reference, test, region=None) -> float:
    """Peak signal-to-noise ratio in dB over an optional region.

    Inputs may be single slices or whole volumes as slice stacks; a
    region may be a mask, a boolean array, or a square rect. Zero error
    returns the 99.0 dB cap.
    """
    ref = _as_array(reference)
    got = _as_array(test)
    if ref.shape != got.shape:
        raise DimensionMismatch(f"reference {ref.shape} vs test {got.shape}")
    err = ref - got
    if region is not None:
        sel = _region_mask(region, ref.shape)
        if not sel.any():
            raise EmptyRegion("region selects no pixels")
        err = err[sel]
    mse = float(np.mean(err * err))
    if mse == 0.0:
        return PSNR_CAP_DB
    return _PEAK_TERM - 10.0 * math.log10(mse)


def compression_ratio(original_bytes: int, compressed_bytes: int) -> float:
    if compressed_bytes <= 0:
        raise ZeroCompressedSize(f"compressed size {compressed_bytes}")
    return original_bytes / compressed_bytes


@dataclass
class SlicePsnr:
    slice_index: int
    psnr: float


@dataclass
class QualityReport:
    """Figures for one compress/reconstruct run."""

    original_bytes: int
    compressed_bytes: int | None
    compression_ratio: float | None
    psnr_full: float
    psnr_roi: float | None = None
    psnr_bg: float | None = None
    segmentation: SegmentationMetrics | None = None
    per_slice: list[SlicePsnr] | None = None
    source_file_bytes: int | None = None

    def __post_init__(self) -> None:
        if self.compressed_bytes is not None and self.compression_ratio is not None:
            expected = self.original_bytes / self.compressed_bytes
            if abs(self.compression_ratio - expected) > 1e-9 * max(1.0, expected):
                raise ValueError(
                    f"ratio {self.compression_ratio} inconsistent with "
                    f"{self.original_bytes}/{self.compressed_bytes}"
                )


def _mb(n: int) -> str:
    return f"{n / (1024 * 1024):.2f}"


def _rows(report: QualityReport) -> list[tuple[str, str]]:
    rows: list[tuple[str, str]] = []
    if report.source_file_bytes is not None:
        rows.append(("source_file_bytes", str(report.source_file_bytes)))
    rows.append(("original_bytes", str(report.original_bytes)))
    rows.append(("original_size_mb", _mb(report.original_bytes)))
    if report.compressed_bytes is not None:
        rows.append(("compressed_bytes", str(report.compressed_bytes)))
        rows.append(("compressed_size_mb", _mb(report.compressed_bytes)))
    if report.compression_ratio is not None:
        rows.append(("compression_ratio", f"{report.compression_ratio:.3f}"))
    rows.append(("psnr_full_db", f"{report.psnr_full:.4f}"))
    if report.psnr_roi is not None:
        rows.append(("psnr_roi_db", f"{report.psnr_roi:.4f}"))
    if report.psnr_bg is not None:
        rows.append(("psnr_bg_db", f"{report.psnr_bg:.4f}"))
    if report.segmentation is not None:
        rows.append(("dice", f"{report.segmentation.dice:.5f}"))
        rows.append(("iou", f"{report.segmentation.iou:.5f}"))
        if report.segmentation.bce is not None:
            rows.append(("bce", f"{report.segmentation.bce:.5f}"))
    if report.per_slice:
        for entry in report.per_slice:
            rows.append((f"psnr_slice_{entry.slice_index:04d}_db", f"{entry.psnr:.4f}"))
    return rows


def render_report(report: QualityReport, fmt: str = "text-table") -> str:
    """Render as an aligned text table or RFC-4180 CSV.

    Row order is deterministic; absent metric blocks are omitted rather
    than zero-filled.
    """
    rows = _rows(report)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["metric", "value"])
        writer.writerows(rows)
        return buf.getvalue()
    if fmt == "text-table":
        name_w = max(len(name) for name, _ in rows)
        val_w = max(len(val) for _, val in rows)
        lines = [f"{'metric':<{name_w}}  {'value':>{val_w}}"]
        lines.append("-" * (name_w + val_w + 2))
        lines.extend(f"{name:<{name_w}}  {val:>{val_w}}" for name, val in rows)
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")
