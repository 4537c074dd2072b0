"""Command-line surface.

Subcommands: inspect, phantom, compress, decompress, evaluate.
Exit codes are a stable contract: 0 success, 2 parse/format error,
3 encoder environment error, 4 integrity error, 5 geometry/config error.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
import tempfile
import os
from pathlib import Path

import numpy as np

from . import codec, pipeline
from .codec import EncoderKind, EncoderSpec
from .errors import (
    ConfigError,
    EncoderError,
    FormatError,
    GeometryError,
    IntegrityError,
    RoicompError,
)
from .imaging import MaskOrigin
from .metrics import render_report
from .nifti import (
    DTYPE_BY_CODE,
    NiftiHeader,
    Volume,
    parse_nifti,
    write_nifti,
)
from .phantom import generate_phantom, phantom_headers
from .pipeline import CompressionSettings
from .segment import SegmentationMetrics

ENV_ENCODER_CMD = "ROICOMP_ENCODER_CMD"
ENV_DECODER_CMD = "ROICOMP_DECODER_CMD"
ENV_TMPDIR = "ROICOMP_TMPDIR"

EXIT_OK = 0
EXIT_FORMAT = 2
EXIT_ENCODER = 3
EXIT_INTEGRITY = 4
EXIT_GEOMETRY = 5

_MASK_MODES = {
    "whole-tumor": MaskOrigin.GROUND_TRUTH_WHOLE_TUMOR,
    "tumor-core": MaskOrigin.GROUND_TRUTH_TUMOR_CORE,
}


def _triple(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected X,Y,Z, got {text!r}")
    return tuple(int(p) for p in parts)


def _triple_f(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected X,Y,Z, got {text!r}")
    return tuple(float(p) for p in parts)


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return doc


def _setting(flag_value, env_name: str, config: dict, config_key: str, default):
    """Config precedence: flags > environment > config file > default."""
    if flag_value is not None:
        return flag_value
    env = os.environ.get(env_name)
    if env:
        return env
    if config_key in config:
        return config[config_key]
    return default


def _resolve_encoder(args, config: dict, kind: EncoderKind | None = None) -> EncoderSpec:
    encode_tpl = _setting(
        getattr(args, "encoder_cmd", None),
        ENV_ENCODER_CMD,
        config,
        "encoder_cmd",
        codec.DEFAULT_ENCODE_TEMPLATE,
    )
    decode_tpl = _setting(
        getattr(args, "decoder_cmd", None),
        ENV_DECODER_CMD,
        config,
        "decoder_cmd",
        codec.DEFAULT_DECODE_TEMPLATE,
    )
    if kind is None:
        kind = (
            EncoderKind.INTERNAL_LOSSLESS
            if args.encoder == "internal-lossless"
            else EncoderKind.EXTERNAL_HEVC
        )
    spec = EncoderSpec(
        kind=kind,
        command_template=encode_tpl,
        decode_template=decode_tpl,
        timeout=args.timeout,
    )
    spec.validate()
    return spec


def _resolve_tmpdir(args, config: dict) -> str | None:
    return _setting(
        getattr(args, "tmpdir", None), ENV_TMPDIR, config, "tmpdir", None
    )


def _read_volume(path: str, time_index: int = 0) -> tuple[NiftiHeader, Volume]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    return parse_nifti(data, time_index=time_index, source=path)


# -- subcommands --


def cmd_inspect(args) -> int:
    hdr, volume = _read_volume(args.path, time_index=args.time_index)
    dtype = DTYPE_BY_CODE[hdr.datatype_code]
    lo, hi = volume.value_range()
    print(f"file:       {args.path}")
    print(f"extents:    {volume.extents[0]} x {volume.extents[1]} x {volume.extents[2]}")
    if hdr.rank == 4:
        print(f"timepoints: {hdr.dim[4]} (reading index {args.time_index})")
    print(f"datatype:   {dtype.name} (code {hdr.datatype_code}, {hdr.bitpix} bits)")
    print(f"spacing:    {volume.spacing[0]:g} x {volume.spacing[1]:g} x {volume.spacing[2]:g} mm")
    print(f"scaling:    slope={hdr.scl_slope:g} inter={hdr.scl_inter:g}")
    print(f"values:     [{lo:g}, {hi:g}]")
    return EXIT_OK


def cmd_phantom(args) -> int:
    extents = args.extents
    center = args.center if args.center is not None else tuple(
        (e - 1) / 2.0 for e in extents
    )
    scan, labels = generate_phantom(extents, center, args.radius, args.seed)
    scan_hdr, label_hdr = phantom_headers(extents)
    Path(args.out).write_bytes(write_nifti(scan_hdr, scan))
    Path(args.labels_out).write_bytes(write_nifti(label_hdr, labels))
    n_label = int(labels.data.sum())
    print(f"wrote {args.out} ({extents[0]}x{extents[1]}x{extents[2]}, int16)")
    print(f"wrote {args.labels_out} ({n_label} labelled voxels)")
    return EXIT_OK


def _masks_for(args, volume: Volume, slices) -> list:
    mode = _MASK_MODES[args.mask_mode]
    if args.mask_source == "labels":
        if not args.labels:
            raise ConfigError("--mask-source labels requires --labels PATH")
        _, label_vol = _read_volume(args.labels)
        return pipeline.masks_from_labels(label_vol, volume.extents, mode)
    if args.mask_source == "external":
        if not args.mask_dir:
            raise ConfigError("--mask-source external requires --mask-dir DIR")
        return pipeline.masks_from_dir(
            args.mask_dir, volume.extents[2], (volume.extents[0], volume.extents[1])
        )
    return pipeline.masks_from_baseline(slices, args.threshold, args.min_component)


def cmd_compress(args) -> int:
    config = _load_config_file(args.config)
    enc = _resolve_encoder(args, config)
    if args.square % 2 or args.square <= 0:
        raise ConfigError(f"square side must be positive and even, got {args.square}")

    run_dir = Path(
        tempfile.mkdtemp(prefix="roicomp-", dir=_resolve_tmpdir(args, config))
    )
    try:
        _, volume = _read_volume(args.volume, time_index=args.time_index)
        slices, _ = pipeline.normalize_volume(volume)
        masks = _masks_for(args, volume, slices)
        settings = CompressionSettings(
            square_side=args.square,
            crf_roi=args.crf_roi,
            crf_bg=args.crf_bg,
            jobs=args.jobs,
        )
        bundle = pipeline.compress_volume(
            volume, masks, settings, enc, work_dir=run_dir / "enc"
        )
        out_dir = codec.write_bundle(bundle, args.out)
        total = codec.bundle_size_on_disk(out_dir)
        raw = sum(s.width * s.height for s in slices)
        print(f"bundle:     {out_dir}")
        print(f"encoder:    {bundle.manifest.encoder_id}")
        print(f"raw stream: {raw} bytes")
        print(f"bundle:     {total} bytes (ratio {raw / total:.3f})")

        if args.verify:
            reconstructed = pipeline.reconstruct_slices(
                bundle, enc, work_dir=run_dir / "dec"
            )
            roi_masks = masks if any(not m.empty for m in masks) else None
            report = pipeline.evaluate_reconstruction(
                slices,
                reconstructed,
                compressed_bytes=total,
                roi_masks=roi_masks,
                source_file_bytes=Path(args.volume).stat().st_size,
            )
            print()
            print(render_report(report, args.format), end="")
    except BaseException:
        print(f"keeping work dir for debugging: {run_dir}", file=sys.stderr)
        raise
    else:
        shutil.rmtree(run_dir, ignore_errors=True)
    return EXIT_OK


def _encoder_for_bundle(args, manifest_encoder_id: str, config: dict) -> EncoderSpec:
    if manifest_encoder_id == codec.INTERNAL_ENCODER_ID:
        return EncoderSpec(kind=EncoderKind.INTERNAL_LOSSLESS)
    return _resolve_encoder(args, config, kind=EncoderKind.EXTERNAL_HEVC)


def cmd_decompress(args) -> int:
    config = _load_config_file(args.config)
    run_dir = Path(
        tempfile.mkdtemp(prefix="roicomp-", dir=_resolve_tmpdir(args, config))
    )
    try:
        bundle = codec.read_bundle(args.bundle)
        enc = _encoder_for_bundle(args, bundle.manifest.encoder_id, config)
        volume = pipeline.decompress_bundle(bundle, enc, work_dir=run_dir)
        nx, ny, nz = volume.extents
        hdr = NiftiHeader(
            dim=(3, nx, ny, nz, 1, 1, 1, 1), datatype_code=2, bitpix=8
        )
        Path(args.out).write_bytes(write_nifti(hdr, volume))
        print(f"wrote {args.out} ({nx}x{ny}x{nz}, uint8)")
    except BaseException:
        print(f"keeping work dir for debugging: {run_dir}", file=sys.stderr)
        raise
    else:
        shutil.rmtree(run_dir, ignore_errors=True)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    _, reference = _read_volume(args.reference)
    _, reconstructed = _read_volume(args.reconstructed)
    if reference.extents != reconstructed.extents:
        raise GeometryError(
            f"extents differ: {reference.extents} vs {reconstructed.extents}"
        )
    # both sides are compared in the same normalized 8-bit domain; for a
    # decompressed volume (values already spanning 0..255) this is identity
    ref_slices, _ = pipeline.normalize_volume(reference)
    recon_slices, _ = pipeline.normalize_volume(reconstructed)

    roi_masks = None
    segmentation: SegmentationMetrics | None = None
    if args.labels:
        _, label_vol = _read_volume(args.labels)
        mode = _MASK_MODES[args.mask_mode]
        roi_masks = pipeline.masks_from_labels(label_vol, reference.extents, mode)
        segmentation = pipeline.segmentation_vs_truth(
            recon_slices, roi_masks, args.threshold, args.min_component
        )
        if all(m.empty for m in roi_masks):
            roi_masks = None
    report = pipeline.evaluate_reconstruction(
        ref_slices,
        recon_slices,
        roi_masks=roi_masks,
        segmentation=segmentation,
        per_slice=args.per_slice,
        source_file_bytes=Path(args.reference).stat().st_size,
    )
    print(render_report(report, args.format), end="")
    return EXIT_OK


# -- argument plumbing --


def _add_encoder_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--encoder",
        choices=["internal-lossless", "external-hevc"],
        default="internal-lossless",
        help="codec backend (default: internal-lossless)",
    )
    p.add_argument("--encoder-cmd", help="external encode template with {input} {output} {crf}")
    p.add_argument("--decoder-cmd", help="external decode template with {input} {output}")
    p.add_argument("--timeout", type=float, default=600.0, help="external tool timeout, seconds")
    p.add_argument("--config", help="JSON config file (encoder_cmd, decoder_cmd, tmpdir)")
    p.add_argument("--tmpdir", help="directory for run-scoped temp files")


def _add_mask_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--mask-mode",
        choices=sorted(_MASK_MODES),
        default="whole-tumor",
        help="which label classes count as ROI (default: whole-tumor)",
    )
    p.add_argument("--threshold", type=int, default=128, help="baseline segmenter threshold")
    p.add_argument(
        "--min-component",
        type=int,
        default=16,
        help="baseline segmenter minimum component area, px",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roicomp",
        description="Region-of-interest compression for volumetric scans.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="print header and extents of a NIfTI file")
    p.add_argument("path")
    p.add_argument("--time-index", type=int, default=0)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("phantom", help="generate a synthetic scan + label volume")
    p.add_argument("--out", required=True, help="output scan .nii")
    p.add_argument("--labels-out", required=True, help="output label .nii")
    p.add_argument("--extents", type=_triple, default=(96, 96, 24))
    p.add_argument("--center", type=_triple_f, default=None, help="sphere center (default: volume middle)")
    p.add_argument("--radius", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("compress", help="compress a volume into a bundle directory")
    p.add_argument("volume", help="input .nii or .nii.gz")
    p.add_argument("--out", required=True, help="bundle output directory")
    p.add_argument(
        "--mask-source",
        choices=["labels", "baseline", "external"],
        default="baseline",
    )
    p.add_argument("--labels", help="label volume for --mask-source labels")
    p.add_argument("--mask-dir", help="PGM directory for --mask-source external")
    p.add_argument("--square", type=int, default=128, help="ROI square side (even)")
    p.add_argument("--crf-roi", type=int, default=20)
    p.add_argument("--crf-bg", type=int, default=40)
    p.add_argument("--jobs", type=int, default=1, help="per-slice parallelism")
    p.add_argument("--time-index", type=int, default=0)
    p.add_argument("--verify", action="store_true", help="decode and report quality")
    p.add_argument("--format", choices=["text-table", "csv"], default="text-table")
    _add_mask_flags(p)
    _add_encoder_flags(p)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="reconstruct a volume from a bundle")
    p.add_argument("bundle", help="bundle directory")
    p.add_argument("--out", required=True, help="output .nii")
    _add_encoder_flags(p)
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("evaluate", help="score a reconstruction against its source")
    p.add_argument("reference")
    p.add_argument("reconstructed")
    p.add_argument("--labels", help="ground-truth label volume")
    p.add_argument("--per-slice", action="store_true")
    p.add_argument("--format", choices=["text-table", "csv"], default="text-table")
    _add_mask_flags(p)
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except EncoderError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ENCODER
    except IntegrityError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except GeometryError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except RoicompError as exc:  # base class fallback
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FORMAT


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
