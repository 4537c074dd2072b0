"""roicomp: region-of-interest compression for volumetric medical scans.

Pipeline: parse a NIfTI-1 volume, slice it, segment (or ingest) a
per-slice ROI mask, carve a fixed square around each ROI, and encode
the ROI and background slice streams at different quality levels.
"""

from .codec import EncoderKind, EncoderSpec, StreamBundle
from .imaging import BinaryMask, MaskOrigin, SliceImage
from .metrics import QualityReport
from .nifti import NiftiHeader, Volume, parse_nifti, write_nifti
from .roi import BoundingBox, RoiRecord, SquareRect
from .segment import SegmentationMetrics
from .stream import Manifest, RawStream

__version__ = "0.1.0"

__all__ = [
    "BinaryMask",
    "BoundingBox",
    "EncoderKind",
    "EncoderSpec",
    "Manifest",
    "MaskOrigin",
    "NiftiHeader",
    "QualityReport",
    "RawStream",
    "RoiRecord",
    "SegmentationMetrics",
    "SliceImage",
    "SquareRect",
    "StreamBundle",
    "Volume",
    "parse_nifti",
    "write_nifti",
    "__version__",
]
