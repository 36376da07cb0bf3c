"""Mesh and point-cloud file I/O: ASCII OBJ, binary little-endian PLY, CSV."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import TubervolError
from ..validation import ensure_points
from .mesh import TriangleMesh


class FileFormatError(TubervolError):
    pass


def save_obj(path, mesh: TriangleMesh) -> None:
    """Write v/f records with 1-based indices."""
    path = Path(path)
    with path.open("w") as fh:
        for x, y, z in mesh.vertices:
            fh.write(f"v {x:.9g} {y:.9g} {z:.9g}\n")
        for a, b, c in mesh.triangles + 1:
            fh.write(f"f {a} {b} {c}\n")


def load_obj(path) -> TriangleMesh:
    vertices = []
    triangles = []
    with Path(path).open() as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                vertices.append([float(p) for p in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                if len(idx) != 3:
                    raise FileFormatError("only triangle faces are supported")
                triangles.append(idx)
    if not vertices:
        raise FileFormatError(f"no vertices in {path}")
    return TriangleMesh(np.array(vertices), np.array(triangles, dtype=np.int64) - 1)


def save_ply(path, mesh: TriangleMesh) -> None:
    """Binary little-endian PLY with float32 vertices and int32 indices."""
    _write_ply(path, mesh.vertices, mesh.triangles)


def save_ply_points(path, points) -> None:
    _write_ply(path, ensure_points(points, allow_empty=True), None)


def _write_ply(path, vertices, triangles) -> None:
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {len(vertices)}"]
    header += ["property float x", "property float y", "property float z"]
    if triangles is not None:
        header += [f"element face {len(triangles)}", "property list uchar int vertex_indices"]
    header.append("end_header")
    with Path(path).open("wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(np.asarray(vertices, dtype="<f4").tobytes())
        if triangles is not None:
            tris = np.asarray(triangles, dtype="<i4")
            block = np.empty((len(tris), 13), dtype=np.uint8)
            block[:, 0] = 3
            block[:, 1:] = tris.view(np.uint8).reshape(len(tris), 12)
            fh.write(block.tobytes())


def _read_ply_header(fh):
    magic = fh.readline().strip()
    if magic != b"ply":
        raise FileFormatError("not a PLY file")
    fmt = None
    elements = []  # (name, count, [(prop_type, prop_name) or ('list', count_t, item_t, name)])
    while True:
        line = fh.readline()
        if not line:
            raise FileFormatError("unterminated PLY header")
        parts = line.decode("ascii").split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if parts[1] == "list":
                elements[-1][2].append(("list", parts[2], parts[3], parts[4]))
            else:
                elements[-1][2].append((parts[1], parts[2]))
        elif parts[0] == "end_header":
            break
    return fmt, elements


_PLY_SCALARS = {
    "float": "<f4", "float32": "<f4", "double": "<f8", "float64": "<f8",
    "uchar": "<u1", "uint8": "<u1", "char": "<i1", "int8": "<i1",
    "short": "<i2", "int16": "<i2", "ushort": "<u2", "uint16": "<u2",
    "int": "<i4", "int32": "<i4", "uint": "<u4", "uint32": "<u4",
}


def _load_ply_arrays(path):
    with Path(path).open("rb") as fh:
        fmt, elements = _read_ply_header(fh)
        if fmt != "binary_little_endian":
            raise FileFormatError(f"unsupported PLY format {fmt!r}")
        vertices = None
        faces = None
        for name, count, props in elements:
            if name == "vertex":
                dtype = np.dtype([(p[1], _PLY_SCALARS[p[0]]) for p in props])
                data = np.frombuffer(fh.read(dtype.itemsize * count), dtype=dtype)
                vertices = np.stack(
                    [data["x"], data["y"], data["z"]], axis=1
                ).astype(np.float64)
            elif name == "face":
                if len(props) != 1 or props[0][0] != "list":
                    raise FileFormatError("unsupported face properties")
                count_t = _PLY_SCALARS[props[0][1]]
                item_t = _PLY_SCALARS[props[0][2]]
                count_size = np.dtype(count_t).itemsize
                item_size = np.dtype(item_t).itemsize
                raw = fh.read(count * (count_size + 3 * item_size))
                rec = np.dtype([("n", count_t), ("idx", item_t, (3,))])
                data = np.frombuffer(raw, dtype=rec)
                if (data["n"] != 3).any():
                    raise FileFormatError("only triangle faces are supported")
                faces = data["idx"].astype(np.int64)
        return vertices, faces


def load_ply(path) -> TriangleMesh:
    vertices, faces = _load_ply_arrays(path)
    if vertices is None or faces is None:
        raise FileFormatError(f"{path} does not contain a triangle mesh")
    return TriangleMesh(vertices, faces)


def load_ply_points(path) -> np.ndarray:
    vertices, _ = _load_ply_arrays(path)
    if vertices is None:
        raise FileFormatError(f"{path} has no vertex element")
    return vertices


def save_csv_points(path, points) -> None:
    pts = ensure_points(points, allow_empty=True)
    with Path(path).open("w") as fh:
        fh.write("x,y,z\n")
        for x, y, z in pts:
            fh.write(f"{x:.9g},{y:.9g},{z:.9g}\n")


def load_csv_points(path) -> np.ndarray:
    with Path(path).open() as fh:
        header = fh.readline().strip().lower().split(",")
        if header[:3] != ["x", "y", "z"]:
            raise FileFormatError("CSV point cloud must start with an x,y,z header")
        rows = [line.split(",")[:3] for line in fh if line.strip()]
    if not rows:
        return np.zeros((0, 3))
    return np.array(rows, dtype=np.float64)
