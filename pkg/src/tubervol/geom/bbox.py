"""PCA-aligned oriented bounding boxes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateInputError
from ..validation import ensure_points


@dataclass(frozen=True)
class OrientedBox:
    """Box aligned to the principal axes of a point set.

    ``extents`` are sorted descending, so they read as
    (length, width, depth) in millimeters.
    """

    center: np.ndarray
    axes: np.ndarray  # rows are orthonormal directions
    extents: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        object.__setattr__(self, "axes", np.asarray(self.axes, dtype=np.float64))
        object.__setattr__(self, "extents", np.asarray(self.extents, dtype=np.float64))
        if (self.extents <= 0).any():
            raise DegenerateInputError("box extents must be positive")
        gram = self.axes @ self.axes.T
        if not np.allclose(gram, np.eye(3), atol=1e-6):
            raise DegenerateInputError("box axes must be orthonormal")

    @property
    def length(self) -> float:
        return float(self.extents[0])

    @property
    def width(self) -> float:
        return float(self.extents[1])

    @property
    def depth(self) -> float:
        return float(self.extents[2])


def oriented_bbox(points) -> OrientedBox:
    """Fit an oriented box with covariance eigenvectors as axes.

    Raises
    ------
    DegenerateInputError
        Fewer than 4 points or a point set of rank < 3.
    """
    pts = ensure_points(points)
    if len(pts) < 4:
        raise DegenerateInputError("need at least 4 points for an oriented box")
    mean = pts.mean(axis=0)
    centered = pts - mean
    cov = centered.T @ centered / len(pts)
    evals, evecs = np.linalg.eigh(cov)
    scale = max(float(np.abs(centered).max()), 1.0)
    if evals[0] <= (1e-9 * scale) ** 2:
        raise DegenerateInputError("point set is degenerate (rank < 3)")

    axes = evecs.T  # rows
    proj = centered @ axes.T
    lo = proj.min(axis=0)
    hi = proj.max(axis=0)
    extents = hi - lo
    order = np.argsort(extents)[::-1]
    axes = axes[order]
    extents = extents[order]
    lo = lo[order]
    hi = hi[order]
    center = mean + 0.5 * (lo + hi) @ axes
    return OrientedBox(center=center, axes=axes, extents=extents)
