"""Convex hulls and hull-based watertight repair."""

from __future__ import annotations

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from ..errors import DegenerateInputError, RepairFailedError
from ..validation import ensure_points
from .mesh import TriangleMesh, is_watertight
from .voxel import voxel_downsample

REPAIR_START_VOXEL_MM = 1.0
REPAIR_MAX_ROUNDS = 5


def convex_hull(points) -> TriangleMesh:
    """Watertight triangulated convex hull of a point set.

    Facets are re-oriented with Qhull's outward plane normals so the
    result follows the counter-clockwise-from-outside convention.

    Raises
    ------
    DegenerateInputError
        Fewer than 4 points, or all points coplanar.
    """
    pts = ensure_points(points)
    if len(pts) < 4:
        raise DegenerateInputError("degenerate hull input")
    try:
        hull = ConvexHull(pts)
    except QhullError as exc:
        raise DegenerateInputError("degenerate hull input") from exc

    tris = hull.simplices.copy()
    corners = pts[tris]
    normals = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    flip = np.einsum("ij,ij->i", normals, hull.equations[:, :3]) < 0
    tris[flip] = tris[flip][:, ::-1]

    # keep only hull vertices, remapped to a compact index range
    remap = np.full(len(pts), -1, dtype=np.int64)
    remap[hull.vertices] = np.arange(len(hull.vertices))
    return TriangleMesh(pts[hull.vertices], remap[tris])


def watertight_repair(mesh: TriangleMesh) -> TriangleMesh:
    """Return the mesh unchanged if already watertight, otherwise rebuild a
    closed surface by voxel-downsampling the vertices (voxel size doubling
    each round) and re-hulling until the result closes.

    Raises
    ------
    RepairFailedError
        Still open after the round budget.
    """
    if is_watertight(mesh):
        return mesh
    voxel = REPAIR_START_VOXEL_MM
    for _ in range(REPAIR_MAX_ROUNDS):
        pts = voxel_downsample(mesh.vertices, voxel)
        try:
            candidate = convex_hull(pts)
        except DegenerateInputError:
            candidate = None
        if candidate is not None and is_watertight(candidate):
            return candidate
        voxel *= 2.0
    raise RepairFailedError("repair failed")
