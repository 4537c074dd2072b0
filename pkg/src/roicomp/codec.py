"""Stream encoding: external HEVC via a command template, or the
built-in lossless reference codec.

The external contract is argv-template based (placeholders {input},
{output}, {crf}); exit code 0 means success and stderr is preserved
verbatim on failure. The internal codec keeps the whole test suite
runnable on hosts without any video tooling.
"""

from __future__ import annotations

import hashlib
import shlex
import struct
import subprocess
import tempfile
import warnings
import zlib
import enum
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    ChecksumError,
    ConfigError,
    Corrupt,
    DecoderFailed,
    EncoderFailed,
    EncoderNotFound,
    EncoderTimeout,
    FormatError,
    GeometryMismatch,
)
from .stream import (
    MANIFEST_FILENAME,
    Manifest,
    RawStream,
    read_manifest,
    read_y4m,
    write_manifest,
    write_y4m,
)

LOSSLESS_MAGIC = b"RCL1"
INTERNAL_ENCODER_ID = "internal-lossless/1"

# ffmpeg is the reference target; any tool honoring the placeholders works.
DEFAULT_ENCODE_TEMPLATE = (
    "ffmpeg -y -i {input} -c:v libx265 -crf {crf} -preset medium -f hevc {output}"
)
DEFAULT_DECODE_TEMPLATE = "ffmpeg -y -f hevc -i {input} -f yuv4mpegpipe {output}"

ROI_PAYLOAD_NAME = "roi.bin"
BG_PAYLOAD_NAME = "bg.bin"


class EncoderKind(enum.Enum):
    EXTERNAL_HEVC = "external-hevc"
    INTERNAL_LOSSLESS = "internal-lossless"


@dataclass
class EncoderSpec:
    kind: EncoderKind
    command_template: str = DEFAULT_ENCODE_TEMPLATE
    decode_template: str = DEFAULT_DECODE_TEMPLATE
    timeout: float = 600.0

    def validate(self) -> None:
        if self.kind is EncoderKind.EXTERNAL_HEVC:
            for ph in ("{input}", "{output}", "{crf}"):
                if ph not in self.command_template:
                    raise ConfigError(
                        f"encoder template is missing {ph}: {self.command_template!r}"
                    )
            for ph in ("{input}", "{output}"):
                if ph not in self.decode_template:
                    raise ConfigError(
                        f"decoder template is missing {ph}: {self.decode_template!r}"
                    )


@dataclass
class StreamBundle:
    """The compressed artifact: two payloads plus their manifest."""

    manifest: Manifest
    roi_payload: bytes
    bg_payload: bytes


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _build_argv(template: str, **subs: str) -> list[str]:
    # split first, substitute per token: paths with spaces stay intact
    return [tok.format(**subs) for tok in shlex.split(template)]


def _run(argv: list[str], timeout: float, what: str) -> None:
    try:
        proc = subprocess.run(
            argv, capture_output=True, timeout=timeout, check=False
        )
    except FileNotFoundError as exc:
        raise EncoderNotFound(f"{what}: cannot launch {argv!r}: {exc}") from exc
    except subprocess.TimeoutExpired as exc:
        raise EncoderTimeout(f"{what}: {argv!r} exceeded {timeout}s") from exc
    if proc.returncode != 0:
        stderr = proc.stderr.decode("utf-8", errors="replace")
        raise EncoderFailed(
            f"{what}: {argv!r} exited {proc.returncode}\n{stderr}"
        )


def _tool_version(template: str, timeout: float = 10.0) -> str:
    """Best-effort identity string for the external tool."""
    exe = shlex.split(template)[0]
    try:
        proc = subprocess.run(
            [exe, "-version"], capture_output=True, timeout=timeout, check=False
        )
        first = (proc.stdout or proc.stderr).decode(
            "utf-8", errors="replace"
        ).splitlines()
        if proc.returncode == 0 and first:
            return first[0].strip()
    except (OSError, subprocess.TimeoutExpired):
        pass
    return f"external:{Path(exe).name}"


# -- internal lossless reference codec --


def internal_lossless_encode(stream: RawStream) -> bytes:
    """Per-frame delta prediction, then deflate; self-framing payload."""
    deltas = bytearray()
    prev = np.zeros((stream.height, stream.width), dtype=np.uint8)
    for frame in stream.frames:
        deltas += (frame - prev).tobytes()  # uint8 wraparound subtraction
        prev = frame
    header = LOSSLESS_MAGIC + struct.pack(
        "<HHI", stream.width, stream.height, stream.frame_count
    )
    return header + zlib.compress(bytes(deltas), level=6)


def internal_lossless_decode(payload: bytes) -> RawStream:
    if len(payload) < 12:
        raise Corrupt(f"payload is {len(payload)} bytes, header needs 12")
    if payload[:4] != LOSSLESS_MAGIC:
        raise BadMagic(f"bad lossless magic {payload[:4]!r}")
    width, height, count = struct.unpack("<HHI", payload[4:12])
    try:
        deltas = zlib.decompress(payload[12:])
    except zlib.error as exc:
        raise Corrupt(f"deflate stream damaged: {exc}") from exc
    per_frame = width * height
    if len(deltas) != per_frame * count:
        raise Corrupt(
            f"payload decodes to {len(deltas)} bytes, "
            f"{width}x{height}x{count} needs {per_frame * count}"
        )
    frames = []
    prev = np.zeros((height, width), dtype=np.uint8)
    for k in range(count):
        delta = np.frombuffer(
            deltas, dtype=np.uint8, count=per_frame, offset=k * per_frame
        ).reshape(height, width)
        prev = prev + delta  # uint8 wraparound addition
        frames.append(prev)
    return RawStream(width=width, height=height, frames=frames)


# -- external HEVC --


def _encode_external(
    stream: RawStream, crf: int, enc: EncoderSpec, work_dir: Path, tag: str
) -> bytes:
    y4m_path = work_dir / f"{tag}.y4m"
    out_path = work_dir / f"{tag}.hevc"
    y4m_path.write_bytes(write_y4m(stream))
    argv = _build_argv(
        enc.command_template,
        input=str(y4m_path),
        output=str(out_path),
        crf=str(crf),
    )
    _run(argv, enc.timeout, f"encode {tag}")
    if not out_path.exists() or out_path.stat().st_size == 0:
        raise EncoderFailed(f"encode {tag}: {argv!r} produced no output")
    return out_path.read_bytes()


def _decode_external(
    payload: bytes, enc: EncoderSpec, work_dir: Path, tag: str
) -> RawStream:
    in_path = work_dir / f"{tag}.hevc"
    y4m_path = work_dir / f"{tag}.dec.y4m"
    in_path.write_bytes(payload)
    argv = _build_argv(
        enc.decode_template, input=str(in_path), output=str(y4m_path)
    )
    try:
        _run(argv, enc.timeout, f"decode {tag}")
    except EncoderFailed as exc:
        raise DecoderFailed(str(exc)) from exc
    try:
        return read_y4m(y4m_path.read_bytes())
    except FormatError as exc:
        raise DecoderFailed(f"decode {tag}: bad y4m from decoder: {exc}") from exc


def encode_bundle(
    roi_stream: RawStream,
    bg_stream: RawStream,
    manifest: Manifest,
    enc: EncoderSpec,
    work_dir: Path | str | None = None,
) -> StreamBundle:
    """Encode both streams and return the bundle with checksums recorded.

    The ROI stream gets crf_roi, the background crf_bg. An inverted pair
    (roi >= bg) is a legal experiment and only warns.
    """
    enc.validate()
    manifest.validate()
    if roi_stream.frame_count != bg_stream.frame_count:
        raise GeometryMismatch(
            f"streams not frame-aligned: roi {roi_stream.frame_count} "
            f"vs bg {bg_stream.frame_count}"
        )
    if manifest.crf_roi >= manifest.crf_bg:
        warnings.warn(
            f"crf_roi {manifest.crf_roi} >= crf_bg {manifest.crf_bg}: "
            "ROI will not be favored",
            UserWarning,
            stacklevel=2,
        )

    if enc.kind is EncoderKind.INTERNAL_LOSSLESS:
        roi_payload = internal_lossless_encode(roi_stream)
        bg_payload = internal_lossless_encode(bg_stream)
        encoder_id = INTERNAL_ENCODER_ID
    else:
        own_tmp = work_dir is None
        work = Path(tempfile.mkdtemp(prefix="roicomp-enc-")) if own_tmp else Path(work_dir)
        work.mkdir(parents=True, exist_ok=True)
        roi_payload = _encode_external(
            roi_stream, manifest.crf_roi, enc, work, "roi"
        )
        bg_payload = _encode_external(bg_stream, manifest.crf_bg, enc, work, "bg")
        encoder_id = _tool_version(enc.command_template)

    stamped = replace(
        manifest,
        encoder_id=encoder_id,
        checksums={"roi": _sha256(roi_payload), "bg": _sha256(bg_payload)},
    )
    return StreamBundle(
        manifest=stamped, roi_payload=roi_payload, bg_payload=bg_payload
    )


def decode_bundle(
    bundle: StreamBundle,
    enc: EncoderSpec,
    work_dir: Path | str | None = None,
) -> tuple[RawStream, RawStream]:
    """Checksum-verify and decode both payloads back to raw streams.

    Returned streams carry the manifest's padded dimensions; callers
    crop padding away when disassembling into slices.
    """
    manifest = bundle.manifest
    manifest.validate()
    for name, payload in (
        ("roi", bundle.roi_payload),
        ("bg", bundle.bg_payload),
    ):
        recorded = manifest.checksums.get(name)
        if recorded is None:
            raise ChecksumError(f"manifest has no checksum for {name}")
        actual = _sha256(payload)
        if actual != recorded:
            raise ChecksumError(
                f"{name} payload checksum {actual[:12]}... != recorded "
                f"{recorded[:12]}..."
            )

    if enc.kind is EncoderKind.INTERNAL_LOSSLESS:
        roi_stream = internal_lossless_decode(bundle.roi_payload)
        bg_stream = internal_lossless_decode(bundle.bg_payload)
    else:
        enc.validate()
        own_tmp = work_dir is None
        work = Path(tempfile.mkdtemp(prefix="roicomp-dec-")) if own_tmp else Path(work_dir)
        work.mkdir(parents=True, exist_ok=True)
        roi_stream = _decode_external(bundle.roi_payload, enc, work, "roi")
        bg_stream = _decode_external(bundle.bg_payload, enc, work, "bg")

    nz = manifest.volume_extents[2]
    for name, stream, dims in (
        ("roi", roi_stream, manifest.roi_padded),
        ("bg", bg_stream, manifest.bg_padded),
    ):
        if (stream.width, stream.height) != tuple(dims):
            raise GeometryMismatch(
                f"{name} stream decodes to {stream.width}x{stream.height}, "
                f"manifest says {dims[0]}x{dims[1]}"
            )
        if stream.frame_count != nz:
            raise GeometryMismatch(
                f"{name} stream has {stream.frame_count} frames, "
                f"manifest says {nz}"
            )
    return roi_stream, bg_stream


# -- bundle directory layout --


def write_bundle(bundle: StreamBundle, out_dir: Path | str) -> Path:
    """Lay the bundle out on disk: manifest.rcm, roi.bin, bg.bin."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / MANIFEST_FILENAME).write_text(write_manifest(bundle.manifest))
    (out / ROI_PAYLOAD_NAME).write_bytes(bundle.roi_payload)
    (out / BG_PAYLOAD_NAME).write_bytes(bundle.bg_payload)
    return out


def read_bundle(bundle_dir: Path | str) -> StreamBundle:
    base = Path(bundle_dir)
    for name in (MANIFEST_FILENAME, ROI_PAYLOAD_NAME, BG_PAYLOAD_NAME):
        if not (base / name).is_file():
            raise FormatError(f"bundle at {base} is missing {name}")
    manifest = read_manifest((base / MANIFEST_FILENAME).read_text())
    return StreamBundle(
        manifest=manifest,
        roi_payload=(base / ROI_PAYLOAD_NAME).read_bytes(),
        bg_payload=(base / BG_PAYLOAD_NAME).read_bytes(),
    )


def bundle_size_on_disk(bundle_dir: Path | str) -> int:
    base = Path(bundle_dir)
    return sum(
        (base / name).stat().st_size
        for name in (MANIFEST_FILENAME, ROI_PAYLOAD_NAME, BG_PAYLOAD_NAME)
    )
