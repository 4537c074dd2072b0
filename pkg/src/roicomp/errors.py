"""Exception hierarchy.

Exceptions are grouped by the CLI exit code they map to:
parse/format errors (2), encoder environment errors (3),
integrity errors (4), geometry/configuration errors (5).
"""


class RoicompError(Exception):
    """Base class for all errors raised by this package."""


# -- parse / format errors (exit code 2) --


class FormatError(RoicompError):
    """Malformed or unsupported input bytes."""


class BadMagic(FormatError):
    pass


class UnsupportedDatatype(FormatError):
    pass


class TruncatedData(FormatError):
    pass


class RankUnsupported(FormatError):
    pass


class UnknownLabel(FormatError):
    pass


class BadY4mHeader(FormatError):
    pass


class TruncatedFrame(FormatError):
    pass


class UnsupportedColorspace(FormatError):
    pass


class BadVersion(FormatError):
    pass


class MissingField(FormatError):
    pass


class UnknownField(FormatError):
    pass


class BadPgm(FormatError):
    pass


# -- encoder environment errors (exit code 3) --


class EncoderError(RoicompError):
    """External codec tooling missing or misbehaving."""


class EncoderNotFound(EncoderError):
    pass


class EncoderFailed(EncoderError):
    pass


class EncoderTimeout(EncoderError):
    pass


class DecoderFailed(EncoderError):
    pass


# -- integrity errors (exit code 4) --


class IntegrityError(RoicompError):
    """Stored artifact does not match its recorded checksums/framing."""


class ChecksumError(IntegrityError):
    pass


class Corrupt(IntegrityError):
    pass


# -- geometry / configuration errors (exit code 5) --


class GeometryError(RoicompError):
    """Shapes, dimensions or settings that cannot be combined."""


class DimensionMismatch(GeometryError):
    pass


class InconsistentDims(GeometryError):
    pass


class SquareTooLarge(GeometryError):
    pass


class GeometryMismatch(GeometryError):
    pass


class EmptyInput(GeometryError):
    pass


class MixedDimensions(GeometryError):
    pass


class GeometryInconsistent(GeometryError):
    pass


class EmptyRegion(GeometryError):
    pass


class ZeroCompressedSize(GeometryError):
    pass


class ConfigError(GeometryError):
    """Invalid settings detected before any work is attempted."""
