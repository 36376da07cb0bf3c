"""Loop subdivision for closed triangle meshes."""

from __future__ import annotations

import numpy as np

from ..errors import MeshNotClosedError
from .mesh import TriangleMesh, is_watertight


def _loop_beta(n: np.ndarray) -> np.ndarray:
    # Loop's neighbor weight: (1/n) * (5/8 - (3/8 + cos(2*pi/n)/4)^2)
    return (0.625 - (0.375 + 0.25 * np.cos(2.0 * np.pi / n)) ** 2) / n


def loop_subdivide(mesh: TriangleMesh, iterations: int = 1) -> TriangleMesh:
    """Split each triangle into four and reposition vertices with Loop
    weights. Requires a watertight input (no boundary rules needed) and
    preserves watertightness.
    """
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    if not is_watertight(mesh):
        raise MeshNotClosedError("mesh not closed")
    for _ in range(iterations):
        mesh = _subdivide_once(mesh)
    return mesh


def _subdivide_once(mesh: TriangleMesh) -> TriangleMesh:
    verts = mesh.vertices
    tris = mesh.triangles
    nv = len(verts)

    # unique undirected edges; every edge has exactly two incident triangles
    raw = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]], axis=0)
    und = np.sort(raw, axis=1)
    edges, edge_of = np.unique(und, axis=0, return_inverse=True)
    ne = len(edges)

    # opposite vertex of each directed edge slot; each undirected edge
    # collects its two opposites
    opposite = np.concatenate([tris[:, 2], tris[:, 0], tris[:, 1]])
    opp_pts = np.zeros((ne, 3))
    np.add.at(opp_pts, edge_of, verts[opposite])

    # odd (edge) vertices: 3/8 (a + b) + 1/8 (c + d)
    edge_points = 0.375 * (verts[edges[:, 0]] + verts[edges[:, 1]]) + 0.125 * opp_pts

    # even (original) vertices: (1 - n*beta) v + beta * sum(neighbors)
    valence = np.zeros(nv)
    np.add.at(valence, edges[:, 0], 1.0)
    np.add.at(valence, edges[:, 1], 1.0)
    neighbor_sum = np.zeros((nv, 3))
    np.add.at(neighbor_sum, edges[:, 0], verts[edges[:, 1]])
    np.add.at(neighbor_sum, edges[:, 1], verts[edges[:, 0]])
    valence = np.maximum(valence, 3.0)
    beta = _loop_beta(valence)
    even_points = (1.0 - valence * beta)[:, None] * verts + beta[:, None] * neighbor_sum

    m = len(tris)
    e01 = edge_of[0:m] + nv
    e12 = edge_of[m : 2 * m] + nv
    e20 = edge_of[2 * m : 3 * m] + nv
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
    return TriangleMesh(np.concatenate([even_points, edge_points]), new_tris)
