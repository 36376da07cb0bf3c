"""Marching cubes isosurface extraction on a regular grid."""

from __future__ import annotations

import numpy as np

from ..errors import EmptyIsosurfaceError
from .mc_tables import CORNER_OFFSETS, CORNER_PAIRS, EDGE_TABLE, TRI_TABLE
from .mesh import TriangleMesh


def grid_points(resolution: int, bounds: float = 1.0) -> np.ndarray:
    """Regular grid over the cube [-bounds, bounds]^3, shape (r^3, 3),
    with x varying slowest (meshgrid 'ij' order)."""
    g = np.linspace(-bounds, bounds, resolution)
    x, y, z = np.meshgrid(g, g, g, indexing="ij")
    return np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)


def marching_cubes(sdf_query, resolution: int, bounds: float = 1.0) -> TriangleMesh:
    """Triangulate the zero level set of a scalar field.

    ``sdf_query`` must accept an (n, 3) array of points and return (n,)
    values (negative inside). Vertices are welded by global edge index, so
    the result is a conforming mesh; with the standard 15-case table the
    triangles of adjacent cells share consistent orientation.

    Raises
    ------
    EmptyIsosurfaceError
        If the sampled grid contains no sign change.
    """
    if resolution < 8:
        raise ValueError(f"resolution must be >= 8, got {resolution}")
    pts = grid_points(resolution, bounds)
    values = np.asarray(sdf_query(pts), dtype=np.float64).reshape(
        resolution, resolution, resolution
    )
    axis = np.linspace(-bounds, bounds, resolution)

    inside = values < 0.0
    if not inside.any() or inside.all():
        raise EmptyIsosurfaceError("empty isosurface")

    r = resolution
    n_cells = r - 1
    # cube index per cell from the 8 corner inside-bits
    cube_index = np.zeros((n_cells, n_cells, n_cells), dtype=np.int64)
    for bit, (dx, dy, dz) in enumerate(CORNER_OFFSETS):
        cube_index |= inside[dx : dx + n_cells, dy : dy + n_cells, dz : dz + n_cells].astype(
            np.int64
        ) << bit

    active = np.argwhere(EDGE_TABLE[cube_index] != 0)
    if len(active) == 0:
        raise EmptyIsosurfaceError("empty isosurface")
    ci = cube_index[active[:, 0], active[:, 1], active[:, 2]]

    # global edge id: an edge is (base grid point, axis); axis 0/1/2 = x/y/z
    def edge_key(cells: np.ndarray, local_edge: np.ndarray) -> np.ndarray:
        ca, cb = CORNER_PAIRS[local_edge, 0], CORNER_PAIRS[local_edge, 1]
        pa = cells + CORNER_OFFSETS[ca]
        pb = cells + CORNER_OFFSETS[cb]
        base = np.minimum(pa, pb)
        axis_id = np.argmax(pa != pb, axis=1)
        return ((base[:, 0] * r + base[:, 1]) * r + base[:, 2]) * 3 + axis_id

    tri_edges = TRI_TABLE[ci]  # (n_active, 16)
    counts = (tri_edges >= 0).sum(axis=1)
    cell_rep = np.repeat(active, counts, axis=0)
    flat_edges = tri_edges[tri_edges >= 0]
    keys = edge_key(cell_rep, flat_edges)

    uniq_keys, tri_idx = np.unique(keys, return_inverse=True)
    triangles = tri_idx.reshape(-1, 3)

    # interpolate one vertex per unique crossed edge
    base_flat = uniq_keys // 3
    axis_id = uniq_keys % 3
    bx = base_flat // (r * r)
    by = (base_flat // r) % r
    bz = base_flat % r
    pa = np.stack([bx, by, bz], axis=1)
    pb = pa.copy()
    pb[np.arange(len(pb)), axis_id] += 1
    va = values[pa[:, 0], pa[:, 1], pa[:, 2]]
    vb = values[pb[:, 0], pb[:, 1], pb[:, 2]]
    t = va / (va - vb)
    pos_a = axis[pa]
    pos_b = axis[pb]
    verts = pos_a + t[:, None] * (pos_b - pos_a)

    mesh = TriangleMesh(verts, triangles[:, ::-1])
    return mesh
