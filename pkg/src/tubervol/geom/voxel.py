"""Voxel-grid point cloud downsampling."""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateInputError
from ..validation import ensure_points


def voxel_downsample(points, voxel: float) -> np.ndarray:
    """One centroid per occupied voxel of edge length ``voxel`` (mm)."""
    if voxel <= 0:
        raise DegenerateInputError(f"voxel size must be positive, got {voxel}")
    pts = ensure_points(points, allow_empty=True)
    if len(pts) == 0:
        return pts
    cells = np.floor((pts - pts.min(axis=0)) / voxel).astype(np.int64)
    _, inverse, counts = np.unique(cells, axis=0, return_inverse=True, return_counts=True)
    sums = np.zeros((len(counts), 3))
    np.add.at(sums, inverse, pts)
    return sums / counts[:, None]
