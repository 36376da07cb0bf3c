import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tubervol import geom
from tubervol.errors import DegenerateInputError


def test_hull_of_cube_corners():
    corners = geom.cube(2.0).vertices
    hull = geom.convex_hull(corners)
    assert hull.n_triangles == 12
    assert geom.is_watertight(hull)
    assert geom.mesh_volume(hull) == pytest.approx(8.0 / 1000.0, rel=1e-12)


def test_hull_ignores_interior_points():
    corners = geom.cube(2.0).vertices
    pts = np.concatenate([corners, [[0.0, 0.0, 0.0]]])
    hull = geom.convex_hull(pts)
    assert hull.n_vertices == 8
    assert geom.mesh_volume(hull) == pytest.approx(8.0 / 1000.0, rel=1e-12)


def test_hull_degenerate_inputs():
    with pytest.raises(DegenerateInputError, match="degenerate hull input"):
        geom.convex_hull(np.zeros((3, 3)))
    coplanar = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0], [0.3, 0.7, 0]], dtype=float)
    with pytest.raises(DegenerateInputError, match="degenerate hull input"):
        geom.convex_hull(coplanar)


def test_hull_contains_ball_samples():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(500, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    pts *= rng.random(500)[:, None] ** (1 / 3)
    hull = geom.convex_hull(pts)
    assert geom.is_watertight(hull)
    vol = geom.mesh_volume(hull) * 1000.0  # back to unit^3
    ball = 4.0 / 3.0 * np.pi
    assert vol <= ball
    assert vol > 0.75 * ball  # tends to the ball volume as n grows
    # Monte-Carlo containment: every input point is inside or on the hull
    field = geom.MeshDistanceField(hull)
    assert (field.signed(pts) <= 1e-6).all()


@settings(max_examples=25, deadline=None)
@given(
    pts=arrays(
        np.float64,
        st.tuples(st.integers(8, 40), st.just(3)),
        elements=st.floats(-100.0, 100.0, allow_nan=False),
    )
)
def test_hull_watertight_and_idempotent(pts):
    try:
        hull = geom.convex_hull(pts)
    except DegenerateInputError:
        return
    assert geom.is_watertight(hull)
    again = geom.convex_hull(hull.vertices)
    lhs = set(map(tuple, np.round(hull.vertices, 9)))
    rhs = set(map(tuple, np.round(again.vertices, 9)))
    assert lhs == rhs


def test_repair_keeps_watertight_mesh_identical():
    c = geom.cube(10.0)
    assert geom.watertight_repair(c) is c


def test_repair_open_cube_recovers_cube():
    c = geom.cube(10.0)
    open_mesh = geom.TriangleMesh(c.vertices, c.triangles[2:])
    repaired = geom.watertight_repair(open_mesh)
    assert geom.is_watertight(repaired)
    assert geom.mesh_volume(repaired) == pytest.approx(1.0, rel=1e-9)


def test_repair_random_patches():
    rng = np.random.default_rng(42)
    for _ in range(20):
        sphere = geom.icosphere(20.0, 2)
        keep = rng.random(sphere.n_triangles) < 0.6
        patch = geom.TriangleMesh(sphere.vertices, sphere.triangles[keep])
        repaired = geom.watertight_repair(patch)
        assert geom.is_watertight(repaired)
