"""Training-time augmentation for frames (2D) and shapes (3D)."""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from scipy import ndimage

from ..geom import TriangleMesh
from ..validation import as_rng
from .frames import RgbdFrame

MAX_ROTATION_DEG = 45.0
BRIGHTNESS_JITTER = 0.5
SATURATION_JITTER = 0.5
HUE_JITTER = 0.1
SHAPE_SCALE_RANGE = (0.5, 2.0)
SHAPE_ROT_Z_MAX_DEG = 30.0
SHAPE_SHEAR_X_MAX = 0.5
SHAPE_AUGMENT_COUNT = 10


def _rgb_to_hsv(rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    r, g, b = rgb
    maxc = rgb.max(axis=0)
    minc = rgb.min(axis=0)
    v = maxc
    c = maxc - minc
    s = np.where(maxc > 0, c / np.maximum(maxc, 1e-12), 0.0)
    safe = np.where(c > 0, c, 1.0)
    rc = (maxc - r) / safe
    gc = (maxc - g) / safe
    bc = (maxc - b) / safe
    h = np.where(maxc == r, bc - gc, np.where(maxc == g, 2.0 + rc - bc, 4.0 + gc - rc))
    h = np.where(c > 0, (h / 6.0) % 1.0, 0.0)
    return h, s, v


def _hsv_to_rgb(h: np.ndarray, s: np.ndarray, v: np.ndarray) -> np.ndarray:
    i = np.floor(h * 6.0)
    f = h * 6.0 - i
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    i = i.astype(np.int64) % 6
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b])


def augment_frame(frame: RgbdFrame, seed) -> RgbdFrame:
    """Random rotation (<= 45 deg) and flips applied identically to rgb,
    depth and mask; brightness/saturation factor and hue-shift jitter on
    rgb only. Deterministic for a fixed seed."""
    rng = as_rng(seed)
    angle = rng.uniform(-MAX_ROTATION_DEG, MAX_ROTATION_DEG)
    hflip = rng.random() < 0.5
    vflip = rng.random() < 0.5
    brightness = rng.uniform(1.0 - BRIGHTNESS_JITTER, 1.0 + BRIGHTNESS_JITTER)
    saturation = rng.uniform(1.0 - SATURATION_JITTER, 1.0 + SATURATION_JITTER)
    hue_shift = rng.uniform(-HUE_JITTER, HUE_JITTER)

    rgb = frame.rgb
    depth = frame.depth
    mask = frame.mask
    if angle != 0.0:
        rgb = ndimage.rotate(rgb, angle, axes=(1, 2), reshape=False, order=1, prefilter=False)
        depth = ndimage.rotate(depth, angle, reshape=False, order=0, prefilter=False)
        mask = ndimage.rotate(mask.astype(np.uint8), angle, reshape=False, order=0,
                              prefilter=False).astype(bool)
    if hflip:
        rgb = rgb[:, :, ::-1]
        depth = depth[:, ::-1]
        mask = mask[:, ::-1]
    if vflip:
        rgb = rgb[:, ::-1, :]
        depth = depth[::-1, :]
        mask = mask[::-1, :]

    h, s, v = _rgb_to_hsv(np.clip(rgb, 0.0, 1.0).astype(np.float64))
    h = (h + hue_shift) % 1.0
    s = np.clip(s * saturation, 0.0, 1.0)
    rgb = np.clip(_hsv_to_rgb(h, s, v) * brightness, 0.0, 1.0)

    # keep all channels pixel-aligned with the transformed mask
    rgb = (rgb * mask).astype(np.float32)
    depth = (depth * mask).astype(np.float32)
    return replace(frame, rgb=np.ascontiguousarray(rgb),
                   depth=np.ascontiguousarray(depth), mask=np.ascontiguousarray(mask))


def shape_augmentations(rng: np.random.Generator):
    """One (scale, rot_z, shear_x) parameter triple."""
    k = rng.uniform(*SHAPE_SCALE_RANGE)
    theta = np.deg2rad(rng.uniform(0.0, SHAPE_ROT_Z_MAX_DEG))
    shear = rng.uniform(0.0, SHAPE_SHEAR_X_MAX)
    return k, theta, shear


def augment_shape(mesh: TriangleMesh, seed, count: int = SHAPE_AUGMENT_COUNT) -> list[TriangleMesh]:
    """``count`` linearly deformed copies: uniform scale in [0.5, 2.0],
    rotation about z up to 30 degrees, then shear of up to 0.5 in the x
    direction (x' = x + s*z). All outputs stay watertight."""
    rng = as_rng(seed)
    out = []
    for _ in range(count):
        k, theta, shear = shape_augmentations(rng)
        c, s = np.cos(theta), np.sin(theta)
        rot_scale = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]) * k
        shear_m = np.eye(3)
        shear_m[0, 2] = shear
        out.append(mesh.transformed(shear_m @ rot_scale))
    return out
