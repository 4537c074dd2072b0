"""Raw video stream assembly, YUV4MPEG2 interchange, sidecar manifest.

The manifest is what makes a compressed bundle self-describing: without
the per-slice square placements recomposition would be impossible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadVersion,
    BadY4mHeader,
    ConfigError,
    EmptyInput,
    GeometryInconsistent,
    MissingField,
    MixedDimensions,
    TruncatedFrame,
    UnknownField,
    UnsupportedColorspace,
)
from .imaging import SliceImage
from .roi import BoundingBox, RoiRecord, SquareRect

FORMAT_VERSION = 1
MANIFEST_FILENAME = "manifest.rcm"
Y4M_SIGNATURE = b"YUV4MPEG2"
# Streams are not temporal media; the rate token is a fixed constant.
Y4M_HEADER_FMT = "YUV4MPEG2 W{w} H{h} F25:1 Ip A1:1 Cmono\n"

_MANIFEST_KEYS = {
    "format_version",
    "volume_extents",
    "square_side",
    "padded_dims",
    "crf_roi",
    "crf_bg",
    "roi_records",
    "normalization",
    "encoder_id",
    "checksums",
}


@dataclass(eq=False)
class RawStream:
    """Ordered 8-bit mono planes with even dimensions."""

    width: int
    height: int
    frames: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.width % 2 or self.height % 2 or self.width < 0 or self.height < 0:
            raise MixedDimensions(
                f"stream dimensions must be even and non-negative, "
                f"got {self.width}x{self.height}"
            )
        checked = []
        for k, frame in enumerate(self.frames):
            arr = np.asarray(frame, dtype=np.uint8)
            if arr.shape != (self.height, self.width):
                raise MixedDimensions(
                    f"frame {k} is {arr.shape}, stream is "
                    f"({self.height}, {self.width})"
                )
            checked.append(arr)
        self.frames = checked

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    @property
    def raw_bytes(self) -> int:
        return self.width * self.height * self.frame_count

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RawStream):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and len(self.frames) == len(other.frames)
            and all(np.array_equal(a, b) for a, b in zip(self.frames, other.frames))
        )


def pad_to_even(arr: np.ndarray) -> np.ndarray:
    """Grow odd dimensions by replicating the last row/column."""
    pad_h = arr.shape[0] % 2
    pad_w = arr.shape[1] % 2
    if pad_h or pad_w:
        arr = np.pad(arr, ((0, pad_h), (0, pad_w)), mode="edge")
    return arr


def assemble(frames: list[SliceImage]) -> RawStream:
    """Stack slices into a raw stream, padding odd dims to even.

    Padding replicates the edge so the encoder does not waste bits on an
    artificial boundary; the manifest records the original dims for
    exact removal.
    """
    if not frames:
        raise EmptyInput("no frames to assemble")
    w, h = frames[0].width, frames[0].height
    for k, f in enumerate(frames):
        if (f.width, f.height) != (w, h):
            raise MixedDimensions(
                f"frame {k} is {f.width}x{f.height}, frame 0 is {w}x{h}"
            )
    planes = [pad_to_even(f.samples) for f in frames]
    return RawStream(width=w + w % 2, height=h + h % 2, frames=planes)


def disassemble(
    stream: RawStream, width: int | None = None, height: int | None = None
) -> list[SliceImage]:
    """Back to slices, cropping away padding when original dims are given."""
    w = stream.width if width is None else width
    h = stream.height if height is None else height
    if w > stream.width or h > stream.height:
        raise GeometryInconsistent(
            f"crop {w}x{h} larger than stream {stream.width}x{stream.height}"
        )
    return [SliceImage.from_array(f[:h, :w]) for f in stream.frames]


# -- YUV4MPEG2 --


def write_y4m(stream: RawStream) -> bytes:
    out = bytearray(Y4M_HEADER_FMT.format(w=stream.width, h=stream.height).encode())
    for frame in stream.frames:
        out += b"FRAME\n"
        out += frame.tobytes()
    return bytes(out)


def read_y4m(data: bytes) -> RawStream:
    eol = data.find(b"\n")
    if eol < 0 or not data.startswith(Y4M_SIGNATURE):
        raise BadY4mHeader("missing YUV4MPEG2 signature")
    tokens = data[:eol].decode("ascii", errors="replace").split(" ")
    width = height = None
    colorspace = None
    for tok in tokens[1:]:
        if not tok:
            continue
        key, rest = tok[0], tok[1:]
        if key == "W":
            width = int(rest)
        elif key == "H":
            height = int(rest)
        elif key == "C":
            colorspace = rest
    if width is None or height is None or width <= 0 or height <= 0:
        raise BadY4mHeader(f"missing or bad geometry in {tokens!r}")
    if colorspace is None:
        raise UnsupportedColorspace("no C token; implied 4:2:0 is unsupported")
    if colorspace != "mono":
        raise UnsupportedColorspace(f"C{colorspace} is unsupported (mono only)")
    if width % 2 or height % 2:
        raise BadY4mHeader(f"odd dimensions {width}x{height}")

    frames = []
    nbytes = width * height
    pos = eol + 1
    while pos < len(data):
        marker_end = data.find(b"\n", pos)
        if marker_end < 0:
            raise TruncatedFrame("unterminated FRAME marker")
        if not data[pos:marker_end].startswith(b"FRAME"):
            raise BadY4mHeader(f"bad frame marker {data[pos:marker_end]!r}")
        body = data[marker_end + 1 : marker_end + 1 + nbytes]
        if len(body) < nbytes:
            raise TruncatedFrame(
                f"frame {len(frames)} has {len(body)} of {nbytes} bytes"
            )
        frames.append(
            np.frombuffer(body, dtype=np.uint8).reshape(height, width).copy()
        )
        pos = marker_end + 1 + nbytes
    return RawStream(width=width, height=height, frames=frames)


# -- manifest --


@dataclass
class Manifest:
    """Sidecar record that makes a bundle decodable on its own."""

    volume_extents: tuple[int, int, int]
    square_side: int
    bg_padded: tuple[int, int]
    roi_padded: tuple[int, int]
    crf_roi: int
    crf_bg: int
    roi_records: list[RoiRecord]
    normalization: tuple[float, float]
    encoder_id: str = ""
    checksums: dict[str, str] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def validate(self) -> None:
        if self.format_version != FORMAT_VERSION:
            raise BadVersion(f"format_version {self.format_version} != {FORMAT_VERSION}")
        if len(self.volume_extents) != 3:
            raise GeometryInconsistent(
                f"volume_extents must have 3 entries, got {self.volume_extents}"
            )
        nx, ny, nz = self.volume_extents
        if len(self.roi_records) != nz:
            raise GeometryInconsistent(
                f"{len(self.roi_records)} roi records for {nz} slices"
            )
        for crf in (self.crf_roi, self.crf_bg):
            if not 0 <= crf <= 51:
                raise ConfigError(f"CRF {crf} outside 0..51")
        for rec in self.roi_records:
            if rec.rect.side != self.square_side:
                raise GeometryInconsistent(
                    f"slice {rec.slice_index}: rect side {rec.rect.side} != "
                    f"square_side {self.square_side}"
                )
            if (
                rec.rect.x0 < 0
                or rec.rect.y0 < 0
                or rec.rect.x0 + rec.rect.side > nx
                or rec.rect.y0 + rec.rect.side > ny
            ):
                raise GeometryInconsistent(
                    f"slice {rec.slice_index}: rect {rec.rect} outside {nx}x{ny}"
                )


def _record_to_dict(rec: RoiRecord) -> dict:
    out: dict = {
        "slice_index": rec.slice_index,
        "present": rec.present,
        "rect": [rec.rect.x0, rec.rect.y0, rec.rect.side],
    }
    if rec.source_bbox is not None:
        b = rec.source_bbox
        out["source_bbox"] = [b.x_min, b.y_min, b.x_max, b.y_max]
    return out


def _record_from_dict(d: dict) -> RoiRecord:
    extra = set(d) - {"slice_index", "present", "rect", "source_bbox"}
    if extra:
        raise UnknownField(f"unknown roi_record keys {sorted(extra)}")
    try:
        rect = SquareRect(*(int(v) for v in d["rect"]))
        bbox = None
        if d.get("source_bbox") is not None:
            bbox = BoundingBox(*(int(v) for v in d["source_bbox"]))
        return RoiRecord(
            slice_index=int(d["slice_index"]),
            present=bool(d["present"]),
            rect=rect,
            source_bbox=bbox,
        )
    except KeyError as exc:
        raise MissingField(f"roi_record missing {exc}") from exc


def write_manifest(manifest: Manifest) -> str:
    """Canonical key-sorted JSON text, trailing newline included."""
    manifest.validate()
    doc = {
        "format_version": manifest.format_version,
        "volume_extents": list(manifest.volume_extents),
        "square_side": manifest.square_side,
        "padded_dims": {
            "bg": list(manifest.bg_padded),
            "roi": list(manifest.roi_padded),
        },
        "crf_roi": manifest.crf_roi,
        "crf_bg": manifest.crf_bg,
        "roi_records": [_record_to_dict(r) for r in manifest.roi_records],
        "normalization": [manifest.normalization[0], manifest.normalization[1]],
        "encoder_id": manifest.encoder_id,
        "checksums": dict(sorted(manifest.checksums.items())),
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def read_manifest(text: str) -> Manifest:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MissingField(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MissingField("manifest root must be an object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise BadVersion(f"format_version {doc.get('format_version')!r}")
    extra = set(doc) - _MANIFEST_KEYS
    if extra:
        raise UnknownField(f"unknown manifest keys {sorted(extra)}")
    missing = _MANIFEST_KEYS - set(doc)
    if missing:
        raise MissingField(f"manifest missing keys {sorted(missing)}")
    padded = doc["padded_dims"]
    if set(padded) != {"bg", "roi"}:
        raise MissingField(f"padded_dims must have bg and roi, got {sorted(padded)}")
    manifest = Manifest(
        volume_extents=tuple(int(v) for v in doc["volume_extents"]),
        square_side=int(doc["square_side"]),
        bg_padded=tuple(int(v) for v in padded["bg"]),
        roi_padded=tuple(int(v) for v in padded["roi"]),
        crf_roi=int(doc["crf_roi"]),
        crf_bg=int(doc["crf_bg"]),
        roi_records=[_record_from_dict(r) for r in doc["roi_records"]],
        normalization=(float(doc["normalization"][0]), float(doc["normalization"][1])),
        encoder_id=str(doc["encoder_id"]),
        checksums={str(k): str(v) for k, v in doc["checksums"].items()},
        format_version=int(doc["format_version"]),
    )
    manifest.validate()
    return manifest
