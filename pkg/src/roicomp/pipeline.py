"""End-to-end orchestration: volume -> masks -> dual streams -> bundle,
and back, plus report assembly.

Per-slice work is pure and can fan out over a thread pool; results are
always emitted in slice order.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .codec import (
    EncoderSpec,
    StreamBundle,
    decode_bundle,
    encode_bundle,
)
from .errors import DimensionMismatch, FormatError, GeometryMismatch
from .imaging import (
    BinaryMask,
    MaskOrigin,
    SliceImage,
    binarize_labels,
    normalize_to_u8,
    read_mask_pgm,
)
from .metrics import QualityReport, SlicePsnr, compression_ratio, psnr
from .nifti import Volume, extract_axial_slices, stack_axial_slices
from .roi import BboxTruncatedWarning, RoiRecord, SquareRect, carve, mask_bbox, place_square, recompose
from .segment import SegmentationMetrics, baseline_segment
from .stream import Manifest, RawStream, assemble, disassemble

MASK_FILE_PATTERN = "mask_{index:04d}.pgm"


@dataclass
class CompressionSettings:
    square_side: int = 128
    crf_roi: int = 20
    crf_bg: int = 40
    jobs: int = 1


# -- mask providers --


def masks_from_labels(
    labels: Volume, extents: tuple[int, int, int], mode: MaskOrigin
) -> list[BinaryMask]:
    if tuple(labels.extents) != tuple(extents):
        raise GeometryMismatch(
            f"label volume {labels.extents} does not align with scan {extents}"
        )
    return [binarize_labels(plane, mode) for plane in extract_axial_slices(labels)]


def masks_from_baseline(
    slices: list[SliceImage], threshold: int, min_component_px: int
) -> list[BinaryMask]:
    return [baseline_segment(s, threshold, min_component_px) for s in slices]


def masks_from_dir(
    mask_dir: Path | str, nz: int, size: tuple[int, int]
) -> list[BinaryMask]:
    base = Path(mask_dir)
    masks = []
    for k in range(nz):
        path = base / MASK_FILE_PATTERN.format(index=k)
        if not path.is_file():
            raise FormatError(f"missing mask file {path}")
        mask = read_mask_pgm(path.read_bytes())
        if (mask.width, mask.height) != size:
            raise DimensionMismatch(
                f"{path.name} is {mask.width}x{mask.height}, slices are "
                f"{size[0]}x{size[1]}"
            )
        masks.append(mask)
    return masks


# -- stream construction --


def normalize_volume(volume: Volume) -> tuple[list[SliceImage], tuple[float, float]]:
    """Slice and map to 8 bits using the volume-wide range."""
    lo, hi = volume.value_range()
    slices = [normalize_to_u8(plane, lo, hi) for plane in extract_axial_slices(volume)]
    return slices, (lo, hi)


def _slice_roi(
    k: int, img: SliceImage, mask: BinaryMask, side: int
) -> tuple[RoiRecord, SliceImage, SliceImage]:
    bbox = mask_bbox(mask)
    if bbox is None:
        rect = SquareRect(0, 0, side)
        record = RoiRecord(slice_index=k, present=False, rect=rect)
        zero_patch = SliceImage.from_array(np.zeros((side, side), dtype=np.uint8))
        return record, zero_patch, img
    if bbox.width > side or bbox.height > side:
        warnings.warn(
            f"slice {k}: bounding box {bbox.width}x{bbox.height} exceeds "
            f"square {side}; edges will be carried in the background stream",
            BboxTruncatedWarning,
            stacklevel=3,
        )
    rect = place_square(bbox, side, (img.width, img.height))
    record = RoiRecord(slice_index=k, present=True, rect=rect, source_bbox=bbox)
    patch, background = carve(img, rect)
    return record, patch, background


def build_streams(
    slices: list[SliceImage],
    masks: list[BinaryMask],
    side: int,
    jobs: int = 1,
) -> tuple[RawStream, RawStream, list[RoiRecord]]:
    """Carve every slice into an ROI patch and a zeroed background.

    Slices without an ROI contribute an all-zero patch so the two
    streams stay frame-aligned.
    """
    if len(slices) != len(masks):
        raise GeometryMismatch(f"{len(slices)} slices but {len(masks)} masks")
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(
                pool.map(
                    lambda args: _slice_roi(*args, side),
                    zip(range(len(slices)), slices, masks),
                )
            )
    else:
        results = [
            _slice_roi(k, img, mask, side)
            for k, (img, mask) in enumerate(zip(slices, masks))
        ]
    records = [r for r, _, _ in results]
    roi_stream = assemble([p for _, p, _ in results])
    bg_stream = assemble([b for _, _, b in results])
    return roi_stream, bg_stream, records


def compress_volume(
    volume: Volume,
    masks: list[BinaryMask],
    settings: CompressionSettings,
    enc: EncoderSpec,
    work_dir: Path | str | None = None,
) -> StreamBundle:
    """The full forward pipeline for an already-masked volume."""
    slices, (lo, hi) = normalize_volume(volume)
    roi_stream, bg_stream, records = build_streams(
        slices, masks, settings.square_side, settings.jobs
    )
    manifest = Manifest(
        volume_extents=volume.extents,
        square_side=settings.square_side,
        bg_padded=(bg_stream.width, bg_stream.height),
        roi_padded=(roi_stream.width, roi_stream.height),
        crf_roi=settings.crf_roi,
        crf_bg=settings.crf_bg,
        roi_records=records,
        normalization=(lo, hi),
    )
    return encode_bundle(roi_stream, bg_stream, manifest, enc, work_dir=work_dir)


def reconstruct_slices(
    bundle: StreamBundle,
    enc: EncoderSpec,
    work_dir: Path | str | None = None,
) -> list[SliceImage]:
    """Decode a bundle and recompose per-slice images."""
    manifest = bundle.manifest
    roi_stream, bg_stream = decode_bundle(bundle, enc, work_dir=work_dir)
    nx, ny, _ = manifest.volume_extents
    side = manifest.square_side
    roi_patches = disassemble(roi_stream, side, side)
    backgrounds = disassemble(bg_stream, nx, ny)
    out = []
    for record, patch, background in zip(
        manifest.roi_records, roi_patches, backgrounds
    ):
        if record.present:
            out.append(recompose(patch, background, record.rect))
        else:
            out.append(background)
    return out


def decompress_bundle(
    bundle: StreamBundle,
    enc: EncoderSpec,
    work_dir: Path | str | None = None,
) -> Volume:
    """Decode to a volume of 8-bit sample values (the normalized domain)."""
    slices = reconstruct_slices(bundle, enc, work_dir=work_dir)
    planes = [s.samples.astype(np.float64) for s in slices]
    volume = stack_axial_slices(planes)
    volume.source_descriptor = f"decoded bundle ({bundle.manifest.encoder_id})"
    return volume


# -- evaluation --


def evaluate_reconstruction(
    reference: list[SliceImage],
    reconstructed: list[SliceImage],
    compressed_bytes: int | None = None,
    roi_masks: list[BinaryMask] | None = None,
    segmentation: SegmentationMetrics | None = None,
    per_slice: bool = False,
    source_file_bytes: int | None = None,
) -> QualityReport:
    """Score a reconstruction against the normalized reference stream."""
    if len(reference) != len(reconstructed):
        raise DimensionMismatch(
            f"{len(reference)} reference slices vs {len(reconstructed)} reconstructed"
        )
    original_bytes = sum(s.width * s.height for s in reference)
    ratio = (
        compression_ratio(original_bytes, compressed_bytes)
        if compressed_bytes is not None
        else None
    )
    psnr_full = psnr(reference, reconstructed)
    psnr_roi = psnr_bg = None
    if roi_masks is not None:
        roi_sel = np.stack([m.bits for m in roi_masks])
        if roi_sel.any():
            psnr_roi = psnr(reference, reconstructed, region=roi_sel)
        if (~roi_sel).any():
            psnr_bg = psnr(reference, reconstructed, region=~roi_sel)
    slice_rows = None
    if per_slice:
        slice_rows = [
            SlicePsnr(slice_index=k, psnr=psnr(a, b))
            for k, (a, b) in enumerate(zip(reference, reconstructed))
        ]
    return QualityReport(
        original_bytes=original_bytes,
        compressed_bytes=compressed_bytes,
        compression_ratio=ratio,
        psnr_full=psnr_full,
        psnr_roi=psnr_roi,
        psnr_bg=psnr_bg,
        segmentation=segmentation,
        per_slice=slice_rows,
        source_file_bytes=source_file_bytes,
    )


def segmentation_vs_truth(
    reconstructed: list[SliceImage],
    truth_masks: list[BinaryMask],
    threshold: int,
    min_component_px: int,
) -> SegmentationMetrics:
    """How well the ROI can still be segmented from the reconstruction.

    Counts are pooled over the whole stack so slices without tumor do
    not dominate the average.
    """
    inter = union = pred_total = truth_total = 0
    for img, truth in zip(reconstructed, truth_masks):
        pred = baseline_segment(img, threshold, min_component_px)
        inter += int(np.logical_and(pred.bits, truth.bits).sum())
        union += int(np.logical_or(pred.bits, truth.bits).sum())
        pred_total += pred.count
        truth_total += truth.count
    if pred_total + truth_total == 0:
        return SegmentationMetrics(dice=1.0, iou=1.0)
    dice_val = 2.0 * inter / (pred_total + truth_total)
    iou_val = inter / union if union else 1.0
    return SegmentationMetrics(dice=dice_val, iou=iou_val)
