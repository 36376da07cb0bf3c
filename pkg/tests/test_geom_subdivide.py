import numpy as np
import pytest

from tubervol import geom
from tubervol.errors import MeshNotClosedError


def test_zero_iterations_is_identity():
    c = geom.cube(3.0)
    out = geom.loop_subdivide(c, 0)
    np.testing.assert_array_equal(out.vertices, c.vertices)
    np.testing.assert_array_equal(out.triangles, c.triangles)


def test_cube_one_iteration():
    out = geom.loop_subdivide(geom.cube(2.0), 1)
    assert out.n_triangles == 48
    assert geom.is_watertight(out)


@pytest.mark.parametrize("iterations", [1, 2, 3])
def test_triangle_count_multiplies_by_four(iterations):
    ico = geom.icosahedron(1.0)
    out = geom.loop_subdivide(ico, iterations)
    assert out.n_triangles == 20 * 4**iterations
    assert geom.is_watertight(out)


def test_icosahedron_smoothing_monotone():
    # repeated subdivision smooths toward the (smaller) limit surface:
    # volumes decrease monotonically and stay below the circumscribed sphere
    ico = geom.icosahedron(10.0)
    volumes = [geom.mesh_volume(ico)]
    mesh = ico
    for _ in range(3):
        mesh = geom.loop_subdivide(mesh, 1)
        volumes.append(geom.mesh_volume(mesh))
    sphere = 4.0 / 3.0 * np.pi * 10.0**3 / 1000.0
    assert all(v < sphere for v in volumes)
    assert all(b < a for a, b in zip(volumes, volumes[1:]))
    # counts follow 20 -> 80 -> 320 -> 1280
    assert mesh.n_triangles == 1280


def test_loop_weights_regular_vertex():
    # valence-6 vertex: beta = (5/8 - (3/8 + cos(pi/3)/4)^2) / 6 = 1/16
    from tubervol.geom.subdivide import _loop_beta

    assert _loop_beta(np.array([6.0]))[0] == pytest.approx(1.0 / 16.0, rel=1e-12)
    # valence 3: 3/16 per Loop's original scheme... beta(3) = (5/8 - (3/8 - 1/8)^2)/3
    expected = (0.625 - (0.375 + 0.25 * np.cos(2 * np.pi / 3)) ** 2) / 3
    assert _loop_beta(np.array([3.0]))[0] == pytest.approx(expected, rel=1e-12)


def test_edge_vertex_weighting():
    # tetra edge midpoint: 3/8 (a + b) + 1/8 (c + d) with known coordinates
    tet = geom.tetrahedron(1.0)
    out = geom.loop_subdivide(tet, 1)
    verts = tet.vertices
    expected = 0.375 * (verts[0] + verts[1]) + 0.125 * (verts[2] + verts[3])
    found = np.isclose(out.vertices, expected, atol=1e-12).all(axis=1).any()
    assert found


def test_requires_watertight():
    c = geom.cube(1.0)
    open_mesh = geom.TriangleMesh(c.vertices, c.triangles[:-1])
    with pytest.raises(MeshNotClosedError):
        geom.loop_subdivide(open_mesh, 1)
