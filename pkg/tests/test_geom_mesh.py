import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tubervol import geom
from tubervol.errors import DegenerateInputError, MeshNotClosedError
from tubervol.geom.mesh import signed_volume_mm3


def test_cube_volume_exact():
    # 100 mm edge -> 1e6 mm^3 -> exactly 1000 ml
    assert geom.mesh_volume(geom.cube(100.0)) == pytest.approx(1000.0, abs=0.0)
    # volume scales with edge^3
    assert geom.mesh_volume(geom.cube(1000.0)) == pytest.approx(1_000_000.0, abs=0.0)


def test_single_tetra_contribution():
    # closed tetra (0,0,0),(1,0,0),(0,1,0),(0,0,1): only the far face
    # contributes a nonzero term; the total signed volume is 1/6 mm^3
    verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
    tris = np.array([[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]])
    mesh = geom.TriangleMesh(verts, tris)
    assert geom.is_watertight(mesh)
    assert signed_volume_mm3(mesh) == pytest.approx(1.0 / 6.0, rel=1e-12)
    # the origin-incident faces contribute zero; the (1,2,3) face is the 1/6 term
    corner = verts[[1, 2, 3]]
    term = float(corner[0] @ np.cross(corner[1], corner[2])) / 6.0
    assert term == pytest.approx(1.0 / 6.0, rel=1e-12)


def test_icosphere_volume_close_to_analytic():
    mesh = geom.icosphere(10.0, 4)
    expected = 4.0 / 3.0 * np.pi * 10.0**3 / 1000.0  # ml
    assert geom.mesh_volume(mesh) == pytest.approx(expected, rel=0.015)


def test_volume_requires_watertight():
    c = geom.cube(10.0)
    open_mesh = geom.TriangleMesh(c.vertices, c.triangles[:-2])
    with pytest.raises(MeshNotClosedError, match="mesh not closed"):
        geom.mesh_volume(open_mesh)


def test_watertight_cases():
    c = geom.cube(1.0)
    assert geom.is_watertight(c)
    assert not geom.is_watertight(geom.TriangleMesh(c.vertices, c.triangles[:-2]))
    # two disjoint closed tetrahedra: closed but not a single component
    t1 = geom.tetrahedron(1.0)
    t2 = geom.tetrahedron(1.0, center=(10.0, 0.0, 0.0))
    both = geom.TriangleMesh(
        np.concatenate([t1.vertices, t2.vertices]),
        np.concatenate([t1.triangles, t2.triangles + len(t1.vertices)]),
    )
    assert not geom.is_watertight(both)


def test_inconsistent_orientation_is_not_watertight():
    c = geom.cube(1.0)
    tris = c.triangles.copy()
    tris[0] = tris[0][::-1]
    assert not geom.is_watertight(geom.TriangleMesh(c.vertices, tris))


def test_mesh_validation():
    with pytest.raises(DegenerateInputError):
        geom.TriangleMesh(np.zeros((3, 3)), np.array([[0, 1, 3]]))
    with pytest.raises(DegenerateInputError):
        geom.TriangleMesh(np.zeros((3, 3)), np.array([[0, 1, 1]]))


@settings(max_examples=20, deadline=None)
@given(
    angle=st.floats(0.0, 2 * np.pi),
    shift=st.tuples(st.floats(-50, 50), st.floats(-50, 50), st.floats(-50, 50)),
    scale=st.floats(0.2, 3.0),
)
def test_volume_invariances(angle, shift, scale):
    mesh = geom.icosphere(10.0, 2)
    base = geom.mesh_volume(mesh)
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    moved = mesh.transformed(rot, shift)
    assert geom.mesh_volume(moved) == pytest.approx(base, rel=1e-9)
    scaled = mesh.transformed(scale * np.eye(3))
    assert geom.mesh_volume(scaled) == pytest.approx(base * scale**3, rel=1e-9)


def test_mirroring_keeps_outward_orientation():
    mesh = geom.icosphere(5.0, 2)
    mirrored = mesh.transformed(np.diag([-1.0, 1.0, 1.0]))
    assert geom.is_watertight(mirrored)
    assert signed_volume_mm3(mirrored) > 0


def test_surface_samples_on_surface():
    mesh = geom.icosphere(10.0, 3)
    pts = geom.surface_samples(mesh, 500, seed=7)
    r = np.linalg.norm(pts, axis=1)
    assert (np.abs(r - 10.0) < 0.15).all()  # chords lie slightly inside
    again = geom.surface_samples(mesh, 500, seed=7)
    np.testing.assert_array_equal(pts, again)
