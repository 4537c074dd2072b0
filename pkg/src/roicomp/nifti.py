"""NIfTI-1 single-file reader/writer and volume slicing.

Only the fields this pipeline needs are interpreted; the remaining
header bytes (orientation, intent, ...) are carried through opaquely
so a read/write cycle does not destroy them.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagic,
    ConfigError,
    FormatError,
    InconsistentDims,
    RankUnsupported,
    TruncatedData,
    UnsupportedDatatype,
)

HEADER_SIZE = 348
VOX_OFFSET = 352
MAGIC_SINGLE = b"n+1\x00"
MAGIC_PAIR = b"ni1\x00"
GZIP_PREFIX = b"\x1f\x8b"

# NIfTI-1 datatype codes accepted by this reader.
DTYPE_BY_CODE = {
    2: np.dtype(np.uint8),
    4: np.dtype(np.int16),
    8: np.dtype(np.int32),
    16: np.dtype(np.float32),
    64: np.dtype(np.float64),
    512: np.dtype(np.uint16),
}
CODE_BY_DTYPE = {dt: code for code, dt in DTYPE_BY_CODE.items()}

# header field -> (byte offset, struct format)
_FIELDS = {
    "sizeof_hdr": (0, "i"),
    "dim": (40, "8h"),
    "datatype": (70, "h"),
    "bitpix": (72, "h"),
    "pixdim": (76, "8f"),
    "vox_offset": (108, "f"),
    "scl_slope": (112, "f"),
    "scl_inter": (116, "f"),
    "magic": (344, "4s"),
}


@dataclass
class NiftiHeader:
    """Interpreted slice of a NIfTI-1 header.

    ``raw`` holds the original 348 header bytes when the header came from
    a file; fields outside the interpreted set are preserved from it on
    write, byte for byte.
    """

    sizeof_hdr: int = HEADER_SIZE
    dim: tuple[int, ...] = (3, 1, 1, 1, 1, 1, 1, 1)
    datatype_code: int = 2
    bitpix: int = 8
    scl_slope: float = 0.0
    scl_inter: float = 0.0
    vox_offset: int = VOX_OFFSET
    pixdim: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0)
    magic: bytes = MAGIC_SINGLE
    raw: bytes | None = field(default=None, repr=False)

    @property
    def rank(self) -> int:
        return self.dim[0]

    @property
    def extents(self) -> tuple[int, ...]:
        return tuple(self.dim[1 : 1 + self.rank])


@dataclass(eq=False)
class Volume:
    """3D scalar grid with voxel metadata.

    ``data`` is float64, shape ``extents``, indexed ``[x, y, z]``;
    scl_slope/scl_inter scaling has already been applied.
    """

    extents: tuple[int, int, int]
    spacing: tuple[float, float, float]
    data: np.ndarray
    source_descriptor: str = ""

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.shape != tuple(self.extents):
            raise InconsistentDims(
                f"data shape {self.data.shape} != extents {self.extents}"
            )
        if not np.all(np.isfinite(self.data)):
            raise FormatError("volume contains non-finite samples")

    @property
    def samples(self) -> np.ndarray:
        """Flat voxel values, x-fastest order."""
        return self.data.ravel(order="F")

    def value_range(self) -> tuple[float, float]:
        return float(self.data.min()), float(self.data.max())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Volume):
            return NotImplemented
        return (
            self.extents == other.extents
            and self.spacing == other.spacing
            and np.array_equal(self.data, other.data)
        )


def _unpack(fmt: str, buf: bytes, offset: int, order: str):
    vals = struct.unpack_from(order + fmt, buf, offset)
    return vals[0] if len(vals) == 1 else vals


def _detect_order(header: bytes) -> str:
    for order in ("<", ">"):
        if struct.unpack_from(order + "i", header, 0)[0] == HEADER_SIZE:
            return order
    raise BadMagic("sizeof_hdr is not 348 under either byte order")


def decode_header(header: bytes) -> tuple[NiftiHeader, str]:
    """Decode 348 header bytes; returns the header and its byte order."""
    if len(header) < HEADER_SIZE:
        raise TruncatedData(f"header is {len(header)} bytes, need {HEADER_SIZE}")
    order = _detect_order(header)
    magic = _unpack("4s", header, 344, order)
    if magic == MAGIC_PAIR:
        raise BadMagic("paired .hdr/.img files are not supported")
    if magic != MAGIC_SINGLE:
        raise BadMagic(f"bad magic {magic!r}")
    dim = _unpack("8h", header, 40, order)
    if not 1 <= dim[0] <= 7:
        raise FormatError(f"dim[0] = {dim[0]} out of range 1..7")
    if dim[0] not in (3, 4):
        raise RankUnsupported(f"only rank 3 or 4 volumes supported, got {dim[0]}")
    if any(dim[i] < 1 for i in range(1, dim[0] + 1)):
        raise FormatError(f"non-positive extent in dim {dim}")
    datatype = _unpack("h", header, 70, order)
    if datatype not in DTYPE_BY_CODE:
        raise UnsupportedDatatype(f"datatype code {datatype}")
    bitpix = _unpack("h", header, 72, order)
    expected_bits = DTYPE_BY_CODE[datatype].itemsize * 8
    if bitpix != expected_bits:
        raise UnsupportedDatatype(
            f"bitpix {bitpix} inconsistent with datatype {datatype} "
            f"(expected {expected_bits})"
        )
    hdr = NiftiHeader(
        sizeof_hdr=HEADER_SIZE,
        dim=tuple(int(v) for v in dim),
        datatype_code=int(datatype),
        bitpix=int(bitpix),
        scl_slope=float(_unpack("f", header, 112, order)),
        scl_inter=float(_unpack("f", header, 116, order)),
        vox_offset=int(round(_unpack("f", header, 108, order))),
        pixdim=tuple(float(v) for v in _unpack("8f", header, 76, order)),
        magic=magic,
        raw=bytes(header[:HEADER_SIZE]),
    )
    return hdr, order


def parse_nifti(
    data: bytes, time_index: int = 0, source: str = ""
) -> tuple[NiftiHeader, Volume]:
    """Parse a single-file NIfTI-1 byte stream (optionally gzipped).

    4D inputs are reduced to 3D by selecting ``time_index``.
    """
    if data[:2] == GZIP_PREFIX:
        try:
            data = gzip.decompress(data)
        except (OSError, EOFError) as exc:
            raise TruncatedData(f"gzip stream damaged: {exc}") from exc
    hdr, order = decode_header(data)

    if hdr.vox_offset < VOX_OFFSET:
        raise FormatError(f"vox_offset {hdr.vox_offset} below minimum {VOX_OFFSET}")
    dtype = DTYPE_BY_CODE[hdr.datatype_code].newbyteorder(order)
    shape = hdr.extents
    nt = shape[3] if hdr.rank == 4 else 1
    nvox = int(np.prod(shape[:3])) * nt
    need = hdr.vox_offset + nvox * dtype.itemsize
    if len(data) < need:
        raise TruncatedData(f"file is {len(data)} bytes, voxel data needs {need}")
    if not 0 <= time_index < nt:
        raise ConfigError(f"time index {time_index} out of range for {nt} volume(s)")

    raw = np.frombuffer(data, dtype=dtype, count=nvox, offset=hdr.vox_offset)
    grid = raw.reshape(shape[:3] + (nt,), order="F")[:, :, :, time_index]
    samples = grid.astype(np.float64)
    slope, inter = hdr.scl_slope, hdr.scl_inter
    if slope != 0.0 and np.isfinite(slope):
        samples = samples * slope + (inter if np.isfinite(inter) else 0.0)

    volume = Volume(
        extents=tuple(int(v) for v in shape[:3]),
        spacing=tuple(float(v) for v in hdr.pixdim[1:4]),
        data=samples,
        source_descriptor=source or f"nifti-1 {shape[:3]} dt={hdr.datatype_code}",
    )
    return hdr, volume


def write_nifti(header: NiftiHeader, volume: Volume) -> bytes:
    """Serialize to an uncompressed little-endian single-file stream.

    The writer owns and normalizes: byte order, sizeof_hdr, dim (rank 3),
    vox_offset (352), scl_slope/scl_inter (0 = samples already scaled),
    pixdim[1:4] (volume spacing) and magic. Everything else comes from
    ``header.raw`` when present.
    """
    if header.rank not in (3, 4):
        raise InconsistentDims(f"cannot write rank-{header.rank} header")
    if tuple(header.dim[1:4]) != tuple(volume.extents):
        raise InconsistentDims(
            f"header extents {header.dim[1:4]} != volume extents {volume.extents}"
        )
    if header.rank == 4 and header.dim[4] != 1:
        raise InconsistentDims("cannot write a multi-timepoint header from one volume")
    if header.datatype_code not in DTYPE_BY_CODE:
        raise UnsupportedDatatype(f"datatype code {header.datatype_code}")

    dtype = DTYPE_BY_CODE[header.datatype_code].newbyteorder("<")
    if dtype.kind in "ui":
        voxels = np.rint(volume.data).astype(dtype)
    else:
        voxels = volume.data.astype(dtype)

    buf = bytearray(header.raw if header.raw is not None else bytes(HEADER_SIZE))
    if len(buf) != HEADER_SIZE:
        raise InconsistentDims(f"raw header must be {HEADER_SIZE} bytes")

    nx, ny, nz = volume.extents
    struct.pack_into("<i", buf, 0, HEADER_SIZE)
    struct.pack_into("<8h", buf, 40, 3, nx, ny, nz, 1, 1, 1, 1)
    struct.pack_into("<h", buf, 70, header.datatype_code)
    struct.pack_into("<h", buf, 72, dtype.itemsize * 8)
    pixdim = list(header.pixdim) + [0.0] * (8 - len(header.pixdim))
    pixdim[1:4] = volume.spacing
    struct.pack_into("<8f", buf, 76, *pixdim[:8])
    struct.pack_into("<f", buf, 108, float(VOX_OFFSET))
    struct.pack_into("<f", buf, 112, 0.0)  # samples carry the scaling already
    struct.pack_into("<f", buf, 116, 0.0)
    struct.pack_into("<4s", buf, 344, MAGIC_SINGLE)

    out = bytes(buf) + b"\x00\x00\x00\x00"  # no extensions
    return out + voxels.tobytes(order="F")


def extract_axial_slices(volume: Volume) -> list[np.ndarray]:
    """Split into nz planes along the third stored axis, ascending z.

    Plane k is float64 with shape (ny, nx): row index is y, column
    index is x, so flattening is x-fastest like the volume itself.
    """
    return [
        np.ascontiguousarray(volume.data[:, :, k].T)
        for k in range(volume.extents[2])
    ]


def stack_axial_slices(
    planes: list[np.ndarray], spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
) -> Volume:
    """Inverse of :func:`extract_axial_slices`."""
    if not planes:
        raise InconsistentDims("no planes to stack")
    ny, nx = planes[0].shape
    data = np.empty((nx, ny, len(planes)), dtype=np.float64)
    for k, plane in enumerate(planes):
        if plane.shape != (ny, nx):
            raise InconsistentDims("planes disagree in shape")
        data[:, :, k] = np.asarray(plane, dtype=np.float64).T
    return Volume(extents=(nx, ny, len(planes)), spacing=spacing, data=data)


def read_nifti_file(path) -> tuple[NiftiHeader, Volume]:
    """Convenience wrapper: read ``.nii`` or ``.nii.gz`` from disk."""
    with open(path, "rb") as fh:
        data = fh.read()
    return parse_nifti(data, source=str(path))
