import numpy as np
import pytest

from tubervol import geom
from tubervol.errors import DegenerateInputError, EmptyIsosurfaceError


class TestVoxelDownsample:
    def test_single_voxel_collapses_to_centroid(self):
        pts = np.array([[0.1, 0.1, 0.1], [0.2, 0.2, 0.2], [0.3, 0.1, 0.2]])
        out = geom.voxel_downsample(pts, 1.0)
        assert out.shape == (1, 3)
        np.testing.assert_allclose(out[0], pts.mean(axis=0))

    def test_grid_spacing_preserves_count(self):
        g = np.arange(5, dtype=float)
        pts = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
        pts += 0.5  # keep points centered in their cells
        out = geom.voxel_downsample(pts, 1.0)
        assert len(out) == len(pts)

    def test_empty_input(self):
        out = geom.voxel_downsample(np.zeros((0, 3)), 2.0)
        assert out.shape == (0, 3)

    def test_bad_voxel(self):
        with pytest.raises(DegenerateInputError):
            geom.voxel_downsample(np.zeros((1, 3)), 0.0)

    def test_count_never_increases(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(0, 10, size=(200, 3))
        out = geom.voxel_downsample(pts, 2.5)
        assert len(out) <= len(pts)


class TestOrientedBbox:
    def test_axis_aligned_cuboid(self):
        corners = geom.box((20.0, 10.0, 5.0)).vertices
        obb = geom.oriented_bbox(corners)
        np.testing.assert_allclose(obb.extents, [20.0, 10.0, 5.0], atol=1e-9)

    def test_rotation_invariance(self):
        corners = geom.box((20.0, 10.0, 5.0)).vertices
        theta = np.deg2rad(30.0)
        c, s = np.cos(theta), np.sin(theta)
        rot = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])
        obb = geom.oriented_bbox(corners @ rot.T)
        np.testing.assert_allclose(obb.extents, [20.0, 10.0, 5.0], rtol=1e-6)

    def test_sphere_extents(self):
        pts = geom.icosphere(1.0, 3).vertices
        obb = geom.oriented_bbox(pts)
        np.testing.assert_allclose(obb.extents, [2.0, 2.0, 2.0], rtol=0.02)
        assert obb.extents[0] / obb.extents[2] == pytest.approx(1.0, rel=0.02)

    def test_degenerate_rank(self):
        pts = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]], dtype=float)
        with pytest.raises(DegenerateInputError):
            geom.oriented_bbox(pts)

    def test_contains_all_points(self):
        rng = np.random.default_rng(1)
        pts = rng.normal(size=(300, 3)) * [5.0, 2.0, 1.0]
        obb = geom.oriented_bbox(pts)
        local = (pts - obb.center) @ obb.axes.T
        assert (np.abs(local) <= obb.extents / 2 + 1e-9).all()


class TestMarchingCubes:
    @staticmethod
    def sphere_query(radius):
        return lambda pts: np.linalg.norm(pts, axis=1) - radius

    def test_sphere_volume_within_3pct(self):
        mesh = geom.marching_cubes(self.sphere_query(0.5), 64)
        assert geom.is_watertight(mesh)
        vol = geom.mesh_volume(mesh) * 1000.0  # interpret units as mm-free
        expected = 4.0 / 3.0 * np.pi * 0.5**3
        assert vol == pytest.approx(expected, rel=0.03)

    def test_all_positive_raises(self):
        with pytest.raises(EmptyIsosurfaceError, match="empty isosurface"):
            geom.marching_cubes(lambda pts: np.ones(len(pts)), 16)

    def test_all_negative_raises(self):
        with pytest.raises(EmptyIsosurfaceError):
            geom.marching_cubes(lambda pts: -np.ones(len(pts)), 16)

    def test_resolution_doubling_monotone(self):
        expected = 4.0 / 3.0 * np.pi * 0.5**3
        errors = []
        for res in (16, 32, 64):
            mesh = geom.marching_cubes(self.sphere_query(0.5), res)
            vol = geom.mesh_volume(mesh) * 1000.0
            errors.append(abs(vol - expected) / expected)
        assert errors[0] > errors[1] > errors[2]

    def test_min_resolution(self):
        with pytest.raises(ValueError):
            geom.marching_cubes(self.sphere_query(0.5), 7)


class TestMeshIO:
    def test_obj_round_trip(self, tmp_path):
        mesh = geom.icosphere(3.0, 1)
        path = tmp_path / "m.obj"
        geom.save_obj(path, mesh)
        back = geom.load_obj(path)
        np.testing.assert_allclose(back.vertices, mesh.vertices, atol=1e-6)
        np.testing.assert_array_equal(back.triangles, mesh.triangles)

    def test_ply_round_trip(self, tmp_path):
        mesh = geom.cube(2.5)
        path = tmp_path / "m.ply"
        geom.save_ply(path, mesh)
        back = geom.load_ply(path)
        np.testing.assert_allclose(back.vertices, mesh.vertices, atol=1e-6)
        np.testing.assert_array_equal(back.triangles, mesh.triangles)

    def test_ply_points_round_trip(self, tmp_path):
        pts = np.random.default_rng(0).normal(size=(40, 3))
        path = tmp_path / "p.ply"
        geom.save_ply_points(path, pts)
        back = geom.load_ply_points(path)
        np.testing.assert_allclose(back, pts, atol=1e-6)

    def test_csv_points_round_trip(self, tmp_path):
        pts = np.random.default_rng(1).normal(size=(25, 3))
        path = tmp_path / "p.csv"
        geom.save_csv_points(path, pts)
        back = geom.load_csv_points(path)
        np.testing.assert_allclose(back, pts, atol=1e-8)
