"""Shared fixtures: byte-level NIfTI builders (independent of the
package's own writer) and discovery of a usable external HEVC encoder."""

from __future__ import annotations

import shutil
import struct
import subprocess
from pathlib import Path

import numpy as np
import pytest

from roicomp.codec import EncoderKind, EncoderSpec

REPO_ROOT = Path(__file__).resolve().parent.parent


def build_nifti_bytes(
    extents,
    dtype_code: int,
    voxels: np.ndarray,
    *,
    order: str = "<",
    rank: int | None = None,
    nt: int = 1,
    scl_slope: float = 0.0,
    scl_inter: float = 0.0,
    bitpix: int | None = None,
    vox_offset: float = 352.0,
    magic: bytes = b"n+1\x00",
    spacing=(1.0, 1.0, 1.0),
) -> bytes:
    """Hand-assemble a single-file NIfTI-1 stream, byte by byte.

    Deliberately does not use the package writer so parser tests have an
    independent reference for the wire format.
    """
    bits_by_code = {2: 8, 4: 16, 8: 32, 16: 32, 64: 64, 512: 16}
    if rank is None:
        rank = 3 if nt == 1 else 4
    if bitpix is None:
        bitpix = bits_by_code[dtype_code]
    hdr = bytearray(348)
    struct.pack_into(order + "i", hdr, 0, 348)
    dim = [rank, extents[0], extents[1], extents[2], nt, 1, 1, 1]
    struct.pack_into(order + "8h", hdr, 40, *dim)
    struct.pack_into(order + "h", hdr, 70, dtype_code)
    struct.pack_into(order + "h", hdr, 72, bitpix)
    pd = [1.0, spacing[0], spacing[1], spacing[2], 0.0, 0.0, 0.0, 0.0]
    struct.pack_into(order + "8f", hdr, 76, *pd)
    struct.pack_into(order + "f", hdr, 108, vox_offset)
    struct.pack_into(order + "f", hdr, 112, scl_slope)
    struct.pack_into(order + "f", hdr, 116, scl_inter)
    struct.pack_into("4s", hdr, 344, magic)
    pad = b"\x00" * (int(vox_offset) - 348)
    body = np.asarray(voxels).astype(
        np.dtype({2: np.uint8, 4: np.int16, 8: np.int32, 16: np.float32,
                  64: np.float64, 512: np.uint16}[dtype_code]).newbyteorder(order)
    )
    return bytes(hdr) + pad + body.tobytes(order="F")


def _ffmpeg_has_libx265(exe: str) -> bool:
    try:
        out = subprocess.run(
            [exe, "-hide_banner", "-encoders"],
            capture_output=True, timeout=20, check=False,
        )
        return b"libx265" in out.stdout
    except (OSError, subprocess.TimeoutExpired):
        return False


def _build_hevctool(out_dir: Path) -> Path | None:
    src = REPO_ROOT / "tools" / "hevctool.c"
    cc = shutil.which("cc") or shutil.which("gcc") or shutil.which("clang")
    if not src.is_file() or cc is None:
        return None
    exe = out_dir / "hevctool"
    cmd = [cc, "-O2", "-o", str(exe), str(src),
           "-lavformat", "-lavcodec", "-lavutil"]
    try:
        proc = subprocess.run(cmd, capture_output=True, timeout=120, check=False)
    except (OSError, subprocess.TimeoutExpired):
        return None
    if proc.returncode != 0 or not exe.is_file():
        return None
    return exe


@pytest.fixture(scope="session")
def hevc_encoder(tmp_path_factory) -> EncoderSpec:
    """A working external HEVC encoder spec, or a skip with notice.

    Prefers ffmpeg with libx265 from PATH; otherwise compiles the
    bundled libavcodec-based transcoder.
    """
    ffmpeg = shutil.which("ffmpeg")
    if ffmpeg and _ffmpeg_has_libx265(ffmpeg):
        return EncoderSpec(kind=EncoderKind.EXTERNAL_HEVC)
    exe = _build_hevctool(tmp_path_factory.mktemp("hevctool"))
    if exe is not None:
        return EncoderSpec(
            kind=EncoderKind.EXTERNAL_HEVC,
            command_template=f"{exe} encode {{input}} {{output}} {{crf}}",
            decode_template=f"{exe} decode {{input}} {{output}}",
        )
    pytest.skip(
        "no HEVC encoder installed (need ffmpeg+libx265 or cc+libavcodec): "
        "skipping external-codec integration tests"
    )
