"""Procedural mesh primitives used by tests and the synthetic generator."""

from __future__ import annotations

import numpy as np

from .mesh import TriangleMesh


def box(extents=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Axis-aligned box as 12 outward-oriented triangles."""
    e = np.asarray(extents, dtype=np.float64) / 2.0
    c = np.asarray(center, dtype=np.float64)
    signs = np.array(
        [[-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
         [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1]],
        dtype=np.float64,
    )
    verts = c + signs * e
    tris = np.array(
        [
            [0, 2, 1], [0, 3, 2],  # bottom (z-)
            [4, 5, 6], [4, 6, 7],  # top (z+)
            [0, 1, 5], [0, 5, 4],  # y-
            [2, 3, 7], [2, 7, 6],  # y+
            [1, 2, 6], [1, 6, 5],  # x+
            [3, 0, 4], [3, 4, 7],  # x-
        ],
        dtype=np.int64,
    )
    return TriangleMesh(verts, tris)


def cube(edge: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    return box((edge, edge, edge), center)


def tetrahedron(scale: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    verts = scale * np.array(
        [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.float64
    ) + np.asarray(center, dtype=np.float64)
    tris = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]], dtype=np.int64)
    return TriangleMesh(verts, tris)


def icosahedron(radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    verts *= radius / np.linalg.norm(verts[0])
    tris = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    return TriangleMesh(verts + np.asarray(center, dtype=np.float64), tris)


def icosphere(radius: float = 1.0, subdivisions: int = 3, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Geodesic sphere: subdivided icosahedron with vertices re-projected
    onto the sphere after every split."""
    mesh = icosahedron(1.0)
    for _ in range(subdivisions):
        mesh = _split_and_project(mesh)
    verts = mesh.vertices * radius + np.asarray(center, dtype=np.float64)
    return TriangleMesh(verts, mesh.triangles)


def _split_and_project(mesh: TriangleMesh) -> TriangleMesh:
    tris = mesh.triangles
    verts = mesh.vertices
    nv = len(verts)
    raw = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]], axis=0)
    und = np.sort(raw, axis=1)
    edges, edge_of = np.unique(und, axis=0, return_inverse=True)
    mid = 0.5 * (verts[edges[:, 0]] + verts[edges[:, 1]])
    mid /= np.linalg.norm(mid, axis=1, keepdims=True)
    m = len(tris)
    e01 = edge_of[0:m] + nv
    e12 = edge_of[m : 2 * m] + nv
    e20 = edge_of[2 * m :] + nv
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    new_tris = np.concatenate(
        [
            np.stack([a, e01, e20], axis=1),
            np.stack([e01, b, e12], axis=1),
            np.stack([e20, e12, c], axis=1),
            np.stack([e01, e12, e20], axis=1),
        ],
        axis=0,
    )
    all_verts = np.concatenate([verts / np.linalg.norm(verts, axis=1, keepdims=True), mid])
    return TriangleMesh(all_verts, new_tris)
