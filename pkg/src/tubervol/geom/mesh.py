"""Indexed triangle meshes in millimeter coordinates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ..errors import DegenerateInputError, MeshNotClosedError, NonFiniteError
from ..validation import as_rng

MM3_PER_ML = 1000.0


@dataclass(frozen=True)
class TriangleMesh:
    """Triangle surface. Triangles are counter-clockwise seen from outside.

    Parameters
    ----------
    vertices : (n, 3) float array, millimeters
    triangles : (m, 3) int array of vertex indices
    """

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        t = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64))
        if v.ndim != 2 or v.shape[1] != 3:
            raise DegenerateInputError(f"vertices must be (n, 3), got {v.shape}")
        if t.ndim != 2 or t.shape[1] != 3:
            raise DegenerateInputError(f"triangles must be (m, 3), got {t.shape}")
        if not np.isfinite(v).all():
            raise NonFiniteError("mesh vertices contain non-finite values")
        if t.size:
            if t.min() < 0 or t.max() >= len(v):
                raise DegenerateInputError("triangle index out of range")
            if ((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 2] == t[:, 0])).any():
                raise DegenerateInputError("triangle with repeated vertices")
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def corners(self) -> np.ndarray:
        """Vertex positions per triangle, shape (m, 3, 3)."""
        return self.vertices[self.triangles]

    def triangle_areas(self) -> np.ndarray:
        c = self.corners()
        return 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)

    def transformed(self, matrix: np.ndarray | None = None, offset=(0.0, 0.0, 0.0)) -> "TriangleMesh":
        """Apply ``v @ matrix.T + offset`` to every vertex.

        Flips triangle winding when the matrix inverts orientation so the
        outward convention survives mirroring.
        """
        v = self.vertices
        if matrix is not None:
            matrix = np.asarray(matrix, dtype=np.float64)
            v = v @ matrix.T
        v = v + np.asarray(offset, dtype=np.float64)
        t = self.triangles
        if matrix is not None and np.linalg.det(matrix) < 0:
            t = t[:, ::-1]
        return TriangleMesh(v, t)


def directed_edges(triangles: np.ndarray) -> np.ndarray:
    """All directed edges (3 per triangle), shape (3m, 2)."""
    return np.concatenate(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]], axis=0
    )


def is_watertight(mesh: TriangleMesh) -> bool:
    """True iff every edge is shared by exactly two consistently oriented
    triangles and the surface forms a single connected component."""
    t = mesh.triangles
    if len(t) < 4:
        return False
    edges = directed_edges(t)
    n = mesh.n_vertices
    key = edges[:, 0] * np.int64(n) + edges[:, 1]
    # consistent orientation: each directed edge occurs once, its reverse once
    if len(np.unique(key)) != len(key):
        return False
    rkey = edges[:, 1] * np.int64(n) + edges[:, 0]
    skey = np.sort(key)
    pos = np.searchsorted(skey, rkey)
    if (pos >= len(skey)).any() or not (skey[np.minimum(pos, len(skey) - 1)] == rkey).all():
        return False
    used = np.unique(t)
    adj = coo_matrix(
        (np.ones(len(edges), dtype=np.int8), (edges[:, 0], edges[:, 1])), shape=(n, n)
    )
    n_comp, labels = connected_components(adj, directed=False)
    return len(np.unique(labels[used])) == 1


def signed_volume_mm3(mesh: TriangleMesh) -> float:
    """Signed sum of tetrahedron contributions v1 . (v2 x v3) / 6."""
    c = mesh.corners()
    return float(np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0)


def mesh_volume(mesh: TriangleMesh) -> float:
    """Enclosed volume in milliliters via the tetrahedron method.

    Raises
    ------
    MeshNotClosedError
        If the mesh is not watertight; open surfaces have no volume.
    """
    if not is_watertight(mesh):
        raise MeshNotClosedError("mesh not closed")
    return abs(signed_volume_mm3(mesh)) / MM3_PER_ML


def surface_samples(mesh: TriangleMesh, n: int, seed=0) -> np.ndarray:
    """Uniform area-weighted point samples on the surface, shape (n, 3)."""
    rng = as_rng(seed)
    areas = mesh.triangle_areas()
    total = areas.sum()
    if n <= 0:
        return np.zeros((0, 3))
    if total <= 0:
        raise DegenerateInputError("mesh has zero surface area")
    idx = rng.choice(len(areas), size=n, p=areas / total)
    c = mesh.corners()[idx]
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    w0 = 1.0 - r1
    w1 = r1 * (1.0 - r2)
    w2 = r1 * r2
    return w0[:, None] * c[:, 0] + w1[:, None] * c[:, 1] + w2[:, None] * c[:, 2]


def merge_duplicate_vertices(vertices: np.ndarray, triangles: np.ndarray, tol: float = 0.0) -> TriangleMesh:
    """Weld coincident vertices (exact match when tol == 0) and drop
    degenerate triangles. Used by mesh builders, not by user code."""
    if tol > 0:
        keyed = np.round(vertices / tol).astype(np.int64)
    else:
        keyed = vertices
    uniq, index, inverse = np.unique(keyed, axis=0, return_index=True, return_inverse=True)
    new_tris = inverse[triangles]
    ok = (
        (new_tris[:, 0] != new_tris[:, 1])
        & (new_tris[:, 1] != new_tris[:, 2])
        & (new_tris[:, 2] != new_tris[:, 0])
    )
    return TriangleMesh(vertices[index], new_tris[ok])
