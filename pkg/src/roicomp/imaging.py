"""2D image primitives: 8-bit grayscale slices, binary masks, PGM interchange."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import BadPgm, DimensionMismatch, UnknownLabel

VALID_LABELS = frozenset({0, 1, 2, 4})
TUMOR_CORE_LABELS = (1, 4)  # enhancing + necrotic; edema (2) excluded


class MaskOrigin(enum.Enum):
    GROUND_TRUTH_WHOLE_TUMOR = "ground-truth-whole-tumor"
    GROUND_TRUTH_TUMOR_CORE = "ground-truth-tumor-core"
    BASELINE = "baseline"
    EXTERNAL = "external"


@dataclass(eq=False)
class SliceImage:
    """One grayscale plane, 8-bit, row-major."""

    width: int
    height: int
    samples: np.ndarray  # uint8, shape (height, width)

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.uint8)
        if self.samples.shape != (self.height, self.width):
            raise DimensionMismatch(
                f"samples shape {self.samples.shape} != ({self.height}, {self.width})"
            )

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "SliceImage":
        arr = np.asarray(arr, dtype=np.uint8)
        return cls(width=arr.shape[1], height=arr.shape[0], samples=arr)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SliceImage):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.samples, other.samples)
        )


@dataclass(eq=False)
class BinaryMask:
    """Per-pixel ROI membership for one slice."""

    width: int
    height: int
    bits: np.ndarray  # bool, shape (height, width)
    label_origin: MaskOrigin = field(default=MaskOrigin.EXTERNAL)

    def __post_init__(self) -> None:
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.shape != (self.height, self.width):
            raise DimensionMismatch(
                f"bits shape {self.bits.shape} != ({self.height}, {self.width})"
            )

    @classmethod
    def from_array(
        cls, arr: np.ndarray, origin: MaskOrigin = MaskOrigin.EXTERNAL
    ) -> "BinaryMask":
        arr = np.asarray(arr, dtype=bool)
        return cls(width=arr.shape[1], height=arr.shape[0], bits=arr, label_origin=origin)

    @property
    def count(self) -> int:
        return int(self.bits.sum())

    @property
    def empty(self) -> bool:
        return not self.bits.any()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.bits, other.bits)
        )


def normalize_to_u8(plane: np.ndarray, lo: float, hi: float) -> SliceImage:
    """Map a real-valued plane into [0, 255] with rounding half-up.

    ``lo``/``hi`` are the *volume-wide* min/max so brightness stays
    consistent across slices; a flat range maps everything to 0.
    """
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2:
        raise DimensionMismatch(f"expected a 2D plane, got shape {plane.shape}")
    if hi < lo:
        raise ValueError(f"bad range: lo={lo} > hi={hi}")
    if hi == lo:
        mapped = np.zeros(plane.shape, dtype=np.uint8)
    else:
        scaled = (plane - lo) * (255.0 / (hi - lo))
        mapped = np.clip(np.floor(scaled + 0.5), 0, 255).astype(np.uint8)
    return SliceImage.from_array(mapped)


def binarize_labels(label_plane: np.ndarray, mode: MaskOrigin) -> BinaryMask:
    """Collapse a BraTS-style label plane {0,1,2,4} into one boolean mask.

    Whole-tumor mode keeps every nonzero label; tumor-core mode keeps
    labels 1 and 4 only.
    """
    plane = np.asarray(label_plane)
    ints = np.rint(plane).astype(np.int64)
    if not np.array_equal(ints, plane.astype(np.float64)):
        raise UnknownLabel("label plane holds non-integer values")
    bad = set(np.unique(ints)) - VALID_LABELS
    if bad:
        raise UnknownLabel(f"unknown label values {sorted(bad)}")
    if mode == MaskOrigin.GROUND_TRUTH_WHOLE_TUMOR:
        bits = ints != 0
    elif mode == MaskOrigin.GROUND_TRUTH_TUMOR_CORE:
        bits = np.isin(ints, TUMOR_CORE_LABELS)
    else:
        raise ValueError(f"mode must be a ground-truth origin, got {mode}")
    return BinaryMask.from_array(bits, origin=mode)


# -- PGM (P5) interchange, the mask format shared with external segmenters --


def write_mask_pgm(mask: BinaryMask) -> bytes:
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    body = np.where(mask.bits, 255, 0).astype(np.uint8).tobytes()
    return header + body


def read_mask_pgm(data: bytes) -> BinaryMask:
    """Parse a binary PGM; pixels >= 128 count as ROI."""
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        if pos >= len(data):
            raise BadPgm("truncated PGM header")
        ch = data[pos : pos + 1]
        if ch == b"#":  # comment to end of line
            eol = data.find(b"\n", pos)
            pos = len(data) if eol < 0 else eol + 1
        elif ch.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            fields.append(data[pos:end])
            pos = end
    pos += 1  # single whitespace after maxval
    magic, w_s, h_s, maxval_s = fields
    if magic != b"P5":
        raise BadPgm(f"not a P5 PGM (magic {magic!r})")
    try:
        width, height, maxval = int(w_s), int(h_s), int(maxval_s)
    except ValueError as exc:
        raise BadPgm(f"bad PGM header field: {exc}") from exc
    if maxval != 255:
        raise BadPgm(f"maxval must be 255, got {maxval}")
    need = width * height
    body = data[pos : pos + need]
    if len(body) < need:
        raise BadPgm(f"PGM body has {len(body)} bytes, needs {need}")
    pixels = np.frombuffer(body, dtype=np.uint8).reshape(height, width)
    return BinaryMask.from_array(pixels >= 128, origin=MaskOrigin.EXTERNAL)
