"""Procedural tuber dataset: superellipsoid shapes and ray-cast RGB-D frames.

Each tuber is a star-shaped superellipsoid (optionally dented for
concavity) described by an analytic radial function, so the mesh, the
inside test, and the depth renderer all agree exactly. Frames are
rendered by a top-view pinhole camera while the tuber translates along
the conveyor direction, sweeping its mask centroid across every
horizontal image band.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geom import TriangleMesh, icosphere, mesh_volume
from ..validation import as_rng
from .dataset import SplitManifest, TuberRecord
from .frames import DEFAULT_INTRINSICS, RgbdFrame, clip_and_mask

FULL_IMAGE_SHAPE = (720, 1280)
CAMERA_HEIGHT_MM = 330.0


@dataclass(frozen=True)
class SynthConfig:
    frames_per_tuber: tuple[int, int] = (20, 30)
    semi_axis_mm: tuple[float, float] = (20.0, 60.0)
    shape_exponent: tuple[float, float] = (0.8, 1.4)
    dent_probability: float = 0.5
    max_dents: int = 2
    dent_amplitude: tuple[float, float] = (0.03, 0.10)
    dent_width_rad: tuple[float, float] = (0.5, 0.9)
    mesh_subdivisions: int = 3
    depth_noise_mm: float = 0.5
    outlier_fraction: float = 0.01
    camera_height_mm: float = CAMERA_HEIGHT_MM
    intrinsics: tuple = DEFAULT_INTRINSICS
    row_margin: int = 40
    split_seed: int = 0


class TuberShape:
    """Star-shaped radial surface r(u) around the origin.

    Base radius solves |x/a|^(2/e) + |y/b|^(2/e) + |z/c|^(2/e) = 1 along a
    unit direction; dents multiply it by 1 - sum_k A_k exp(-(angle/w_k)^2).
    """

    def __init__(self, semi_axes, exponent, dent_dirs=None, dent_amps=None, dent_widths=None):
        self.semi_axes = np.asarray(semi_axes, dtype=np.float64)
        self.exponent = float(exponent)
        self.dent_dirs = np.zeros((0, 3)) if dent_dirs is None else np.asarray(dent_dirs)
        self.dent_amps = np.zeros(0) if dent_amps is None else np.asarray(dent_amps)
        self.dent_widths = np.ones(0) if dent_widths is None else np.asarray(dent_widths)

    def radius(self, dirs: np.ndarray) -> np.ndarray:
        dirs = np.asarray(dirs, dtype=np.float64)
        p = 2.0 / self.exponent
        base = (np.abs(dirs / self.semi_axes) ** p).sum(axis=-1) ** (-1.0 / p)
        if len(self.dent_dirs):
            cosang = np.clip(dirs @ self.dent_dirs.T, -1.0, 1.0)
            ang = np.arccos(cosang)
            dent = (self.dent_amps * np.exp(-((ang / self.dent_widths) ** 2))).sum(axis=-1)
            base = base * (1.0 - dent)
        return base

    def implicit(self, points: np.ndarray) -> np.ndarray:
        """Negative inside, positive outside (units of mm, not a distance)."""
        points = np.asarray(points, dtype=np.float64)
        r = np.linalg.norm(points, axis=-1)
        safe = np.maximum(r, 1e-12)
        return r - self.radius(points / safe[..., None])

    def mesh(self, subdivisions: int = 3) -> TriangleMesh:
        unit = icosphere(1.0, subdivisions)
        dirs = unit.vertices / np.linalg.norm(unit.vertices, axis=1, keepdims=True)
        return TriangleMesh(dirs * self.radius(dirs)[:, None], unit.triangles)

    def max_radius(self) -> float:
        return float(self.semi_axes.max())


def _sample_shape(rng: np.random.Generator, cfg: SynthConfig) -> TuberShape:
    axes = rng.uniform(*cfg.semi_axis_mm, size=3)
    exponent = rng.uniform(*cfg.shape_exponent)
    dent_dirs = dent_amps = dent_widths = None
    if rng.random() < cfg.dent_probability:
        n = int(rng.integers(1, cfg.max_dents + 1))
        raw = rng.normal(size=(n, 3))
        dent_dirs = raw / np.linalg.norm(raw, axis=1, keepdims=True)
        dent_amps = rng.uniform(*cfg.dent_amplitude, size=n)
        dent_widths = rng.uniform(*cfg.dent_width_rad, size=n)
    return TuberShape(axes, exponent, dent_dirs, dent_amps, dent_widths)


def _render_frame(shape: TuberShape, center_xy, cfg: SynthConfig, albedo,
                  rng: np.random.Generator, tuber_id: str, frame_index: int) -> RgbdFrame:
    """Ray-cast one full image and cut the masked 304x304 crop."""
    fx, fy, cx, cy = cfg.intrinsics
    h_img, w_img = FULL_IMAGE_SHAPE
    z0 = cfg.camera_height_mm
    center = np.array([center_xy[0], center_xy[1], z0])

    r_max = shape.max_radius()
    pr = int(np.ceil(r_max / (z0 - r_max) * max(fx, fy))) + 4
    uc = cx + center[0] / z0 * fx
    vc = cy + center[1] / z0 * fy
    u0, u1 = max(int(uc) - pr, 0), min(int(uc) + pr + 1, w_img)
    v0, v1 = max(int(vc) - pr, 0), min(int(vc) + pr + 1, h_img)

    uu, vv = np.meshgrid(np.arange(u0, u1), np.arange(v0, v1), indexing="xy")
    dirs = np.stack(
        [(uu - cx) / fx, (vv - cy) / fy, np.ones_like(uu, dtype=np.float64)], axis=-1
    )
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    flat_dirs = dirs.reshape(-1, 3)

    # march along each ray across the tuber's depth slab, then bisect
    t_center = (flat_dirs @ center)  # parameter of closest approach to center
    n_steps = 16
    offsets = np.linspace(-r_max * 1.05, r_max * 1.05, n_steps)
    hit = np.zeros(len(flat_dirs), dtype=bool)
    t_lo = np.zeros(len(flat_dirs))
    t_hi = np.zeros(len(flat_dirs))
    prev_t = t_center + offsets[0]
    prev_f = shape.implicit(prev_t[:, None] * flat_dirs - center)
    for off in offsets[1:]:
        t = t_center + off
        f = shape.implicit(t[:, None] * flat_dirs - center)
        fresh = ~hit & (prev_f > 0) & (f <= 0)
        t_lo[fresh] = prev_t[fresh]
        t_hi[fresh] = t[fresh]
        hit |= fresh
        prev_t, prev_f = t, f
    if not hit.any():
        raise RuntimeError("tuber projected outside the image")

    lo = t_lo[hit]
    hi = t_hi[hit]
    d_h = flat_dirs[hit]
    for _ in range(12):
        mid = 0.5 * (lo + hi)
        inside = shape.implicit(mid[:, None] * d_h - center) <= 0
        hi = np.where(inside, mid, hi)
        lo = np.where(inside, lo, mid)
    t_hit = 0.5 * (lo + hi)
    points = t_hit[:, None] * d_h

    # shading normal from the implicit gradient (finite differences)
    eps = 0.25
    grad = np.stack(
        [
            shape.implicit(points - center + np.array([eps, 0, 0]))
            - shape.implicit(points - center - np.array([eps, 0, 0])),
            shape.implicit(points - center + np.array([0, eps, 0]))
            - shape.implicit(points - center - np.array([0, eps, 0])),
            shape.implicit(points - center + np.array([0, 0, eps]))
            - shape.implicit(points - center - np.array([0, 0, eps])),
        ],
        axis=1,
    )
    grad /= np.maximum(np.linalg.norm(grad, axis=1, keepdims=True), 1e-12)
    light = np.array([0.25, -0.15, -1.0])
    light /= np.linalg.norm(light)
    shade = 0.45 + 0.55 * np.maximum(0.0, grad @ -light)

    window_shape = (v1 - v0, u1 - u0)
    mask_w = np.zeros(window_shape, dtype=bool)
    depth_w = np.zeros(window_shape, dtype=np.float64)
    rgb_w = np.zeros(window_shape + (3,), dtype=np.float64)
    mask_flat = hit.reshape(window_shape)
    mask_w[:] = mask_flat
    depth_vals = points[:, 2]
    depth_vals = depth_vals + rng.normal(0.0, cfg.depth_noise_mm, size=len(depth_vals))
    if cfg.outlier_fraction > 0:
        n_out = int(np.floor(cfg.outlier_fraction * len(depth_vals)))
        if n_out:
            pick = rng.choice(len(depth_vals), size=n_out, replace=False)
            depth_vals[pick] += rng.uniform(40.0, 90.0, size=n_out)
    depth_w[mask_flat] = np.clip(depth_vals, 100.0, 1000.0)
    rgb_w[mask_flat] = np.clip(albedo[None, :] * shade[:, None], 0.0, 1.0)

    full_rgb = np.zeros(FULL_IMAGE_SHAPE + (3,), dtype=np.float32)
    full_depth = np.zeros(FULL_IMAGE_SHAPE, dtype=np.float32)
    full_mask = np.zeros(FULL_IMAGE_SHAPE, dtype=bool)
    full_rgb[v0:v1, u0:u1] = rgb_w
    full_depth[v0:v1, u0:u1] = depth_w
    full_mask[v0:v1, u0:u1] = mask_w

    return clip_and_mask(
        full_rgb, full_depth, full_mask,
        tuber_id=tuber_id, cultivar="Synthetic",
        intrinsics=cfg.intrinsics, frame_index=frame_index,
    )


def synth_generate(n_tubers: int, seed=0, config: SynthConfig | None = None) -> list[TuberRecord]:
    """Generate ``n_tubers`` synthetic records with watertight ground-truth
    meshes, 20-30 rendered frames each, and a 70/15/15 split manifest.
    Bit-reproducible for a fixed seed."""
    if n_tubers < 1:
        raise ValueError("n_tubers must be >= 1")
    cfg = config or SynthConfig()
    rng = as_rng(seed)
    fy = cfg.intrinsics[1]
    cy = cfg.intrinsics[3]
    manifest = SplitManifest.from_ids(
        [f"synth_{i:03d}" for i in range(n_tubers)], seed=cfg.split_seed
    )

    records = []
    for i in range(n_tubers):
        tuber_id = f"synth_{i:03d}"
        shape = _sample_shape(rng, cfg)
        mesh = shape.mesh(cfg.mesh_subdivisions)
        albedo = np.clip(
            np.array([0.72, 0.58, 0.33]) + rng.uniform(-0.08, 0.08, size=3), 0.05, 0.95
        )
        n_frames = int(rng.integers(cfg.frames_per_tuber[0], cfg.frames_per_tuber[1] + 1))

        # sweep the belt direction so centroids populate every region band
        rows = np.linspace(cfg.row_margin, FULL_IMAGE_SHAPE[0] - cfg.row_margin, n_frames)
        rows = rows + rng.uniform(-10.0, 10.0, size=n_frames)
        cols = rng.uniform(500.0, 780.0, size=n_frames)

        frames = []
        for f in range(n_frames):
            y_c = (rows[f] - cy) * cfg.camera_height_mm / fy
            x_c = (cols[f] - cfg.intrinsics[2]) * cfg.camera_height_mm / cfg.intrinsics[0]
            frames.append(
                _render_frame(shape, (x_c, y_c), cfg, albedo, rng, tuber_id, f)
            )

        records.append(
            TuberRecord(
                tuber_id=tuber_id,
                cultivar="Synthetic",
                mesh=mesh,
                volume_ml=mesh_volume(mesh),
                frames=frames,
                split=manifest[tuber_id],
            )
        )
    return records
