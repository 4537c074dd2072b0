import gzip

import numpy as np
import pytest

from roicomp.errors import (
    BadMagic,
    ConfigError,
    InconsistentDims,
    RankUnsupported,
    TruncatedData,
    UnsupportedDatatype,
)
from roicomp.nifti import (
    DTYPE_BY_CODE,
    NiftiHeader,
    Volume,
    extract_axial_slices,
    parse_nifti,
    stack_axial_slices,
    write_nifti,
)
from conftest import build_nifti_bytes


def u8_cube():
    return np.arange(8, dtype=np.uint8).reshape(2, 2, 2, order="F")


def test_minimal_uint8_decode():
    data = build_nifti_bytes((2, 2, 2), 2, u8_cube())
    hdr, vol = parse_nifti(data)
    assert hdr.sizeof_hdr == 348
    assert hdr.extents == (2, 2, 2)
    assert vol.extents == (2, 2, 2)
    # x-fastest order
    assert vol.samples.tolist() == list(range(8))


def test_slope_inter_scaling():
    data = build_nifti_bytes((2, 2, 2), 2, u8_cube(), scl_slope=2.0, scl_inter=1.0)
    _, vol = parse_nifti(data)
    assert vol.samples.tolist() == [1, 3, 5, 7, 9, 11, 13, 15]


def test_slope_zero_means_no_scaling():
    data = build_nifti_bytes((2, 2, 2), 2, u8_cube(), scl_slope=0.0, scl_inter=7.0)
    _, vol = parse_nifti(data)
    assert vol.samples.tolist() == list(range(8))


def test_gzip_transparent_decompress():
    plain = build_nifti_bytes((2, 2, 2), 2, u8_cube())
    _, vol_a = parse_nifti(plain)
    _, vol_b = parse_nifti(gzip.compress(plain))
    assert vol_a == vol_b


def test_endianness_detection():
    voxels = np.arange(24, dtype=np.int16).reshape(2, 3, 4, order="F") * 100
    little = build_nifti_bytes((2, 3, 4), 4, voxels, order="<")
    big = build_nifti_bytes((2, 3, 4), 4, voxels, order=">")
    _, vol_le = parse_nifti(little)
    _, vol_be = parse_nifti(big)
    assert vol_le == vol_be


def test_bad_magic_rejected():
    data = build_nifti_bytes((2, 2, 2), 2, u8_cube(), magic=b"xxx\x00")
    with pytest.raises(BadMagic):
        parse_nifti(data)


def test_paired_magic_rejected():
    data = build_nifti_bytes((2, 2, 2), 2, u8_cube(), magic=b"ni1\x00")
    with pytest.raises(BadMagic):
        parse_nifti(data)


def test_bad_sizeof_hdr_rejected():
    data = bytearray(build_nifti_bytes((2, 2, 2), 2, u8_cube()))
    data[0:4] = (99).to_bytes(4, "little")
    with pytest.raises(BadMagic):
        parse_nifti(bytes(data))


def test_unsupported_datatype():
    data = build_nifti_bytes((2, 2, 2), 2, u8_cube())
    patched = bytearray(data)
    patched[70:72] = (32).to_bytes(2, "little")  # complex64
    with pytest.raises(UnsupportedDatatype):
        parse_nifti(bytes(patched))


def test_bitpix_mismatch_rejected():
    data = build_nifti_bytes((2, 2, 2), 2, u8_cube(), bitpix=16)
    with pytest.raises(UnsupportedDatatype):
        parse_nifti(data)


def test_truncated_voxels():
    data = build_nifti_bytes((2, 2, 2), 2, u8_cube())
    with pytest.raises(TruncatedData):
        parse_nifti(data[:-3])


def test_truncated_header():
    with pytest.raises(TruncatedData):
        parse_nifti(build_nifti_bytes((2, 2, 2), 2, u8_cube())[:100])


def test_rank_unsupported():
    data = build_nifti_bytes((2, 2, 2), 2, u8_cube(), rank=2)
    with pytest.raises(RankUnsupported):
        parse_nifti(data)
    data = build_nifti_bytes((2, 2, 2), 2, np.tile(u8_cube(), (1, 1, 1)), rank=5)
    with pytest.raises(RankUnsupported):
        parse_nifti(data)


def test_4d_selects_time_index():
    frames = np.stack(
        [np.full((2, 2, 2), t, dtype=np.uint8) for t in range(3)], axis=-1
    )
    data = build_nifti_bytes((2, 2, 2), 2, frames, nt=3, rank=4)
    _, vol0 = parse_nifti(data, time_index=0)
    _, vol2 = parse_nifti(data, time_index=2)
    assert np.all(vol0.data == 0)
    assert np.all(vol2.data == 2)
    with pytest.raises(ConfigError):
        parse_nifti(data, time_index=3)


def test_4d_requires_all_timepoint_bytes():
    frames = np.zeros((2, 2, 2, 3), dtype=np.uint8)
    data = build_nifti_bytes((2, 2, 2), 2, frames, nt=3, rank=4)
    with pytest.raises(TruncatedData):
        parse_nifti(data[:-8])  # last timepoint short


def test_write_minimal_size():
    vol = Volume(extents=(1, 1, 1), spacing=(1.0, 1.0, 1.0), data=np.zeros((1, 1, 1)))
    hdr = NiftiHeader(dim=(3, 1, 1, 1, 1, 1, 1, 1), datatype_code=2, bitpix=8)
    out = write_nifti(hdr, vol)
    assert len(out) == 352 + 1


def test_write_rejects_rank5_header():
    vol = Volume(extents=(2, 2, 2), spacing=(1.0, 1.0, 1.0), data=np.zeros((2, 2, 2)))
    hdr = NiftiHeader(dim=(5, 2, 2, 2, 1, 1, 1, 1), datatype_code=2, bitpix=8)
    with pytest.raises(InconsistentDims):
        write_nifti(hdr, vol)


def test_write_rejects_extent_mismatch():
    vol = Volume(extents=(2, 2, 2), spacing=(1.0, 1.0, 1.0), data=np.zeros((2, 2, 2)))
    hdr = NiftiHeader(dim=(3, 2, 3, 2, 1, 1, 1, 1), datatype_code=2, bitpix=8)
    with pytest.raises(InconsistentDims):
        write_nifti(hdr, vol)


def _random_voxels(rng, extents, code):
    dtype = DTYPE_BY_CODE[code]
    if dtype.kind == "f":
        vals = rng.standard_normal(extents) * 100
        return vals.astype(dtype)
    info = np.iinfo(dtype)
    return rng.integers(info.min, info.max, size=extents, endpoint=True).astype(dtype)


def test_roundtrip_all_datatypes_random_volumes():
    # parse(write(h, v)) == (normalized h, v), exactly
    rng = np.random.default_rng(42)
    for code in DTYPE_BY_CODE:
        for _ in range(20):
            extents = tuple(int(e) for e in rng.integers(1, 7, size=3))
            voxels = _random_voxels(rng, extents, code)
            data = build_nifti_bytes(extents, code, voxels, spacing=(0.5, 2.0, 1.25))
            hdr, vol = parse_nifti(data)
            out = write_nifti(hdr, vol)
            hdr2, vol2 = parse_nifti(out)
            assert vol2 == vol, f"voxels changed for dtype code {code}"
            assert hdr2.dim == hdr.dim
            assert hdr2.datatype_code == hdr.datatype_code
            assert hdr2.bitpix == hdr.bitpix
            assert hdr2.pixdim[1:4] == hdr.pixdim[1:4]
            # fields the writer owns
            assert hdr2.vox_offset == 352
            assert hdr2.scl_slope == 0.0 and hdr2.scl_inter == 0.0
            assert hdr2.magic == b"n+1\x00"


def test_roundtrip_preserves_scaled_samples():
    data = build_nifti_bytes((2, 2, 2), 2, u8_cube(), scl_slope=2.0, scl_inter=1.0)
    hdr, vol = parse_nifti(data)
    _, vol2 = parse_nifti(write_nifti(hdr, vol))
    assert vol2.samples.tolist() == [1, 3, 5, 7, 9, 11, 13, 15]


def test_roundtrip_preserves_opaque_header_bytes():
    data = bytearray(build_nifti_bytes((2, 2, 2), 2, u8_cube()))
    data[148:160] = b"hello world!"  # descrip field, uninterpreted
    hdr, vol = parse_nifti(bytes(data))
    out = write_nifti(hdr, vol)
    assert out[148:160] == b"hello world!"


def test_big_endian_roundtrips_through_writer():
    voxels = np.arange(8, dtype=np.int16).reshape(2, 2, 2, order="F")
    hdr, vol = parse_nifti(build_nifti_bytes((2, 2, 2), 4, voxels, order=">"))
    _, vol2 = parse_nifti(write_nifti(hdr, vol))
    assert vol2 == vol


def test_slice_extraction_shapes_and_order():
    data = np.zeros((2, 2, 3))
    for z in range(3):
        data[:, :, z] = z
    vol = Volume(extents=(2, 2, 3), spacing=(1, 1, 1), data=data)
    slices = extract_axial_slices(vol)
    assert len(slices) == 3
    for k, plane in enumerate(slices):
        assert plane.shape == (2, 2)
        assert np.all(plane == k)


def test_slice_layout_matches_index_arithmetic():
    # concatenated slice samples reproduce volume.samples reordered
    # per samples[x + nx*(y + ny*z)] == slice_z[y, x]
    rng = np.random.default_rng(7)
    nx, ny, nz = 4, 3, 5
    vol = Volume(
        extents=(nx, ny, nz),
        spacing=(1, 1, 1),
        data=rng.integers(0, 255, size=(nx, ny, nz)).astype(np.float64),
    )
    slices = extract_axial_slices(vol)
    flat = vol.samples
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                assert slices[z][y, x] == flat[x + nx * (y + ny * z)]
    total = sum(s.size for s in slices)
    assert total == flat.size  # every voxel in exactly one slice


def test_stack_inverts_extract():
    rng = np.random.default_rng(11)
    vol = Volume(
        extents=(5, 4, 3),
        spacing=(1, 1, 1),
        data=rng.random((5, 4, 3)),
    )
    rebuilt = stack_axial_slices(extract_axial_slices(vol), spacing=vol.spacing)
    assert rebuilt == vol
