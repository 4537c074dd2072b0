"""Synthetic test volumes: smooth textured background plus a bright
spherical "tumor" with a matching label volume.

Stands in for real multi-modal scans at desk scale; everything is
seeded so two runs with the same arguments are byte-identical.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ConfigError
from .nifti import CODE_BY_DTYPE, NiftiHeader, Volume

BACKGROUND_LOW = 15.0
BACKGROUND_HIGH = 85.0
SPHERE_LOW = 195.0
SPHERE_HIGH = 235.0


def _smooth_field(rng: np.random.Generator, extents, sigma: float) -> np.ndarray:
    field = gaussian_filter(rng.standard_normal(extents), sigma=sigma, mode="nearest")
    lo, hi = field.min(), field.max()
    if hi == lo:
        return np.zeros(extents)
    return (field - lo) / (hi - lo)


def sphere_mask(
    extents: tuple[int, int, int],
    center: tuple[float, float, float],
    radius: float,
) -> np.ndarray:
    """Voxels whose center lies strictly inside the sphere."""
    nx, ny, nz = extents
    x = np.arange(nx, dtype=np.float64)[:, None, None]
    y = np.arange(ny, dtype=np.float64)[None, :, None]
    z = np.arange(nz, dtype=np.float64)[None, None, :]
    d2 = (x - center[0]) ** 2 + (y - center[1]) ** 2 + (z - center[2]) ** 2
    return d2 < radius * radius


def generate_phantom(
    extents: tuple[int, int, int],
    center: tuple[float, float, float],
    radius: float,
    seed: int = 0,
) -> tuple[Volume, Volume]:
    """Build (scan volume, label volume); labels are 1 inside the sphere."""
    if any(e < 1 for e in extents):
        raise ConfigError(f"extents must be positive, got {extents}")
    if radius < 0:
        raise ConfigError(f"radius must be non-negative, got {radius}")
    rng = np.random.default_rng(seed)
    background = BACKGROUND_LOW + (BACKGROUND_HIGH - BACKGROUND_LOW) * _smooth_field(
        rng, extents, sigma=2.0
    )
    tumor_texture = SPHERE_LOW + (SPHERE_HIGH - SPHERE_LOW) * _smooth_field(
        rng, extents, sigma=1.5
    )
    inside = sphere_mask(extents, center, radius)
    data = np.where(inside, tumor_texture, background)
    data = np.rint(data)

    scan = Volume(
        extents=extents,
        spacing=(1.0, 1.0, 1.0),
        data=data,
        source_descriptor=f"phantom seed={seed} r={radius}",
    )
    labels = Volume(
        extents=extents,
        spacing=(1.0, 1.0, 1.0),
        data=inside.astype(np.float64),
        source_descriptor=f"phantom-labels seed={seed} r={radius}",
    )
    return scan, labels


def phantom_headers(extents: tuple[int, int, int]) -> tuple[NiftiHeader, NiftiHeader]:
    """int16 header for the scan, uint8 for the labels."""
    dim = (3, extents[0], extents[1], extents[2], 1, 1, 1, 1)
    scan_hdr = NiftiHeader(
        dim=dim, datatype_code=CODE_BY_DTYPE[np.dtype(np.int16)], bitpix=16
    )
    label_hdr = NiftiHeader(
        dim=dim, datatype_code=CODE_BY_DTYPE[np.dtype(np.uint8)], bitpix=8
    )
    return scan_hdr, label_hdr
