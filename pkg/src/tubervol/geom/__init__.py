"""Pure geometry kernels: meshes, hulls, subdivision, SDF sampling, boxes."""

from .bbox import OrientedBox, oriented_bbox
from .hull import convex_hull, watertight_repair
from .io import (
    load_csv_points,
    load_obj,
    load_ply,
    load_ply_points,
    save_csv_points,
    save_obj,
    save_ply,
    save_ply_points,
)
from .marching import grid_points, marching_cubes
from .mesh import TriangleMesh, is_watertight, mesh_volume, surface_samples
from .primitives import box, cube, icosahedron, icosphere, tetrahedron
from .sdf import (
    CANONICAL_SCALE_MM,
    CanonicalTransform,
    MeshDistanceField,
    SdfSampleSet,
    canonicalize,
    sample_sdf,
    signed_distance,
)
from .subdivide import loop_subdivide
from .voxel import voxel_downsample

__all__ = [
    "CANONICAL_SCALE_MM",
    "CanonicalTransform",
    "MeshDistanceField",
    "OrientedBox",
    "SdfSampleSet",
    "TriangleMesh",
    "box",
    "canonicalize",
    "convex_hull",
    "cube",
    "grid_points",
    "icosahedron",
    "icosphere",
    "is_watertight",
    "load_csv_points",
    "load_obj",
    "load_ply",
    "load_ply_points",
    "loop_subdivide",
    "marching_cubes",
    "mesh_volume",
    "oriented_bbox",
    "sample_sdf",
    "save_csv_points",
    "save_obj",
    "save_ply",
    "save_ply_points",
    "signed_distance",
    "surface_samples",
    "tetrahedron",
    "voxel_downsample",
    "watertight_repair",
]
