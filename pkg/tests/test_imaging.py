import numpy as np
import pytest

from roicomp.errors import BadPgm, DimensionMismatch, UnknownLabel
from roicomp.imaging import (
    BinaryMask,
    MaskOrigin,
    SliceImage,
    binarize_labels,
    normalize_to_u8,
    read_mask_pgm,
    write_mask_pgm,
)

WHOLE = MaskOrigin.GROUND_TRUTH_WHOLE_TUMOR
CORE = MaskOrigin.GROUND_TRUTH_TUMOR_CORE


def test_normalize_flat_input_maps_to_zero():
    plane = np.full((3, 4), 7.3)
    img = normalize_to_u8(plane, 7.3, 7.3)
    assert np.all(img.samples == 0)


def test_normalize_identity_range():
    plane = np.array([[0.0, 255.0], [255.0, 0.0]])
    img = normalize_to_u8(plane, 0.0, 255.0)
    assert img.samples.tolist() == [[0, 255], [255, 0]]


def test_normalize_rounds_half_up():
    plane = np.array([[0.0, 1.0, 2.0]])
    img = normalize_to_u8(plane, 0.0, 2.0)
    # round(1 * 255/2) = round(127.5) = 128 half-up
    assert img.samples.tolist() == [[0, 128, 255]]


def test_normalize_uses_volume_range_not_plane_range():
    plane = np.array([[10.0, 20.0]])
    img = normalize_to_u8(plane, 0.0, 100.0)
    assert img.samples.tolist() == [[26, 51]]  # floor(25.5+0.5), floor(51+0.5)


def test_normalize_is_order_preserving():
    rng = np.random.default_rng(5)
    for _ in range(50):
        vals = rng.uniform(-50, 150, size=(1, 40))
        lo, hi = vals.min(), vals.max()
        mapped = normalize_to_u8(vals, lo, hi).samples[0]
        order = np.argsort(vals[0], kind="stable")
        assert np.all(np.diff(mapped[order].astype(int)) >= 0)


def test_binarize_all_zero():
    mask = binarize_labels(np.zeros((2, 2), dtype=int), WHOLE)
    assert mask.empty
    assert mask.label_origin is WHOLE


def test_binarize_whole_tumor():
    plane = np.array([[0, 1, 2, 4]])
    mask = binarize_labels(plane, WHOLE)
    assert mask.bits.tolist() == [[False, True, True, True]]


def test_binarize_tumor_core_excludes_edema():
    plane = np.array([[0, 1, 2, 4]])
    mask = binarize_labels(plane, CORE)
    assert mask.bits.tolist() == [[False, True, False, True]]


def test_binarize_unknown_label():
    with pytest.raises(UnknownLabel):
        binarize_labels(np.array([[0, 3]]), WHOLE)
    with pytest.raises(UnknownLabel):
        binarize_labels(np.array([[0.5, 1.0]]), WHOLE)


def test_binarize_idempotent():
    rng = np.random.default_rng(9)
    plane = rng.choice([0, 1, 2, 4], size=(16, 16))
    for mode in (WHOLE, CORE):
        once = binarize_labels(plane, mode)
        again = binarize_labels(once.bits.astype(int), MaskOrigin.GROUND_TRUTH_WHOLE_TUMOR)
        assert once == again


def test_slice_image_shape_validated():
    with pytest.raises(DimensionMismatch):
        SliceImage(width=3, height=2, samples=np.zeros((3, 3), dtype=np.uint8))


def test_mask_shape_validated():
    with pytest.raises(DimensionMismatch):
        BinaryMask(width=3, height=2, bits=np.zeros((2, 2), dtype=bool))


def test_pgm_roundtrip():
    rng = np.random.default_rng(3)
    for _ in range(20):
        h, w = rng.integers(1, 40, size=2)
        mask = BinaryMask.from_array(rng.random((h, w)) < 0.4)
        again = read_mask_pgm(write_mask_pgm(mask))
        assert again == mask


def test_pgm_bytes_layout():
    mask = BinaryMask.from_array(np.array([[True, False], [False, True]]))
    data = write_mask_pgm(mask)
    assert data == b"P5\n2 2\n255\n" + bytes([255, 0, 0, 255])


def test_pgm_accepts_comments():
    data = b"P5\n# a comment\n2 1\n255\n" + bytes([255, 0])
    mask = read_mask_pgm(data)
    assert mask.bits.tolist() == [[True, False]]


def test_pgm_rejects_bad_magic_and_maxval():
    with pytest.raises(BadPgm):
        read_mask_pgm(b"P2\n2 1\n255\n12")
    with pytest.raises(BadPgm):
        read_mask_pgm(b"P5\n2 1\n65535\n" + bytes(4))
    with pytest.raises(BadPgm):
        read_mask_pgm(b"P5\n2 2\n255\n" + bytes(2))  # short body
