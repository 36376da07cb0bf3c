"""Masked RGB-D frames and their preprocessing chain.

A frame holds a 304x304 crop centered on one tuber's mask. Depth starts
in millimeters (0 marks invalid pixels); ``depth_filter`` drops returns
away from the dominant depth band and ``depth_normalize`` maps the
working range of the conveyor (230-350 mm from the camera) to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import DegenerateInputError, ShapeMismatchError
from ..validation import ensure_points

FRAME_SIZE = 304
DEPTH_NEAR_MM = 230.0
DEPTH_FAR_MM = 350.0
DEPTH_BIN_MM = 5.0
DEPTH_BAND_MM = 20.0
MIN_MASK_AREA = 100
DEFAULT_INTRINSICS = (660.0, 660.0, 639.5, 359.5)  # fx, fy, cx, cy


@dataclass(frozen=True)
class RgbdFrame:
    rgb: np.ndarray  # (3, 304, 304) float32 in [0, 1]
    depth: np.ndarray  # (304, 304) float32, mm until normalized, 0 = invalid
    mask: np.ndarray  # (304, 304) bool
    tuber_id: str
    cultivar: str = "Synthetic"
    centroid_row: int = 0  # mask centroid row in the original full image
    intrinsics: tuple = DEFAULT_INTRINSICS
    crop_origin: tuple = (0, 0)  # (row, col) of this crop in the full image
    frame_index: int = 0
    depth_normalized: bool = False

    def __post_init__(self):
        rgb = np.asarray(self.rgb, dtype=np.float32)
        depth = np.asarray(self.depth, dtype=np.float32)
        mask = np.asarray(self.mask, dtype=bool)
        if rgb.shape != (3, FRAME_SIZE, FRAME_SIZE):
            raise ShapeMismatchError(f"rgb must be (3, {FRAME_SIZE}, {FRAME_SIZE}), got {rgb.shape}")
        if depth.shape != (FRAME_SIZE, FRAME_SIZE) or mask.shape != depth.shape:
            raise ShapeMismatchError("depth/mask must be (304, 304)")
        object.__setattr__(self, "rgb", rgb)
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "mask", mask)

    def valid_depth(self) -> np.ndarray:
        return self.mask & (self.depth > 0)


def depth_filter(frame: RgbdFrame) -> RgbdFrame:
    """Zero out masked depth pixels outside +-20 mm of the modal 5 mm bin.

    The modal bin is the tuber; farther returns are belt or background.
    Idempotent: the surviving band always contains its own mode.
    """
    if frame.depth_normalized:
        raise ValueError("depth_filter must run before depth_normalize")
    valid = frame.valid_depth()
    if not valid.any():
        raise DegenerateInputError("empty mask: no valid depth to filter")
    depths = frame.depth[valid]
    bins = np.floor(depths / DEPTH_BIN_MM).astype(np.int64)
    uniq, counts = np.unique(bins, return_counts=True)
    mode_center = (uniq[np.argmax(counts)] + 0.5) * DEPTH_BIN_MM
    keep = np.abs(frame.depth - mode_center) <= DEPTH_BAND_MM
    new_depth = np.where(valid & keep, frame.depth, 0.0).astype(np.float32)
    return replace(frame, depth=new_depth)


def depth_normalize(frame: RgbdFrame) -> RgbdFrame:
    """Map valid depths linearly from [230, 350] mm to [0, 1] (clamped);
    invalid pixels stay 0. A second call is a no-op."""
    if frame.depth_normalized:
        return frame
    valid = frame.depth > 0
    scaled = (frame.depth - DEPTH_NEAR_MM) / (DEPTH_FAR_MM - DEPTH_NEAR_MM)
    new_depth = np.where(valid, np.clip(scaled, 0.0, 1.0), 0.0).astype(np.float32)
    return replace(frame, depth=new_depth, depth_normalized=True)


def preprocess(frame: RgbdFrame) -> RgbdFrame:
    return depth_normalize(depth_filter(frame))


def clip_and_mask(full_rgb, full_depth, mask, *, tuber_id: str, cultivar: str = "Synthetic",
                  intrinsics=DEFAULT_INTRINSICS, frame_index: int = 0,
                  box_mode: bool = False) -> RgbdFrame:
    """Cut a 304x304 crop centered on the mask centroid out of a full image.

    Outside-mask pixels are zeroed in every channel; in ``box_mode`` the
    raw pixels inside the mask's bounding box are kept instead (the crop
    an object detector would deliver). Border crops are zero-padded.
    """
    full_rgb = np.asarray(full_rgb, dtype=np.float32)
    if full_rgb.ndim == 3 and full_rgb.shape[2] == 3:
        full_rgb = full_rgb.transpose(2, 0, 1)
    full_depth = np.asarray(full_depth, dtype=np.float32)
    mask = np.asarray(mask, dtype=bool)
    if full_depth.shape != mask.shape or full_rgb.shape[1:] != mask.shape:
        raise ShapeMismatchError("rgb/depth/mask image sizes differ")

    rows, cols = np.nonzero(mask)
    if len(rows) < MIN_MASK_AREA:
        raise DegenerateInputError("degenerate mask")
    cr = int(round(rows.mean()))
    cc = int(round(cols.mean()))
    half = FRAME_SIZE // 2
    row0, col0 = cr - half, cc - half

    crop_rgb = np.zeros((3, FRAME_SIZE, FRAME_SIZE), dtype=np.float32)
    crop_depth = np.zeros((FRAME_SIZE, FRAME_SIZE), dtype=np.float32)
    crop_mask = np.zeros((FRAME_SIZE, FRAME_SIZE), dtype=bool)

    h, w = mask.shape
    src_r0, src_r1 = max(row0, 0), min(row0 + FRAME_SIZE, h)
    src_c0, src_c1 = max(col0, 0), min(col0 + FRAME_SIZE, w)
    dst_r0, dst_c0 = src_r0 - row0, src_c0 - col0
    dst_r1, dst_c1 = dst_r0 + (src_r1 - src_r0), dst_c0 + (src_c1 - src_c0)

    crop_mask[dst_r0:dst_r1, dst_c0:dst_c1] = mask[src_r0:src_r1, src_c0:src_c1]
    if box_mode:
        rmin, rmax = rows.min(), rows.max()
        cmin, cmax = cols.min(), cols.max()
        box = np.zeros_like(mask)
        box[rmin : rmax + 1, cmin : cmax + 1] = True
        keep = np.zeros((FRAME_SIZE, FRAME_SIZE), dtype=bool)
        keep[dst_r0:dst_r1, dst_c0:dst_c1] = box[src_r0:src_r1, src_c0:src_c1]
    else:
        keep = crop_mask
    crop_rgb[:, dst_r0:dst_r1, dst_c0:dst_c1] = full_rgb[:, src_r0:src_r1, src_c0:src_c1]
    crop_depth[dst_r0:dst_r1, dst_c0:dst_c1] = full_depth[src_r0:src_r1, src_c0:src_c1]
    crop_rgb *= keep
    crop_depth *= keep

    return RgbdFrame(
        rgb=crop_rgb,
        depth=crop_depth,
        mask=crop_mask,
        tuber_id=tuber_id,
        cultivar=cultivar,
        centroid_row=cr,
        intrinsics=tuple(intrinsics),
        crop_origin=(row0, col0),
        frame_index=frame_index,
    )


def frame_to_pointcloud(frame: RgbdFrame) -> np.ndarray:
    """Pinhole back-projection of the valid depth pixels, camera frame (mm).

    x = (u - cx) d / fx, y = (v - cy) d / fy, z = d, with (u, v) taken in
    full-image coordinates via the crop origin.
    """
    if frame.depth_normalized:
        raise ValueError("back-projection needs metric depth (run before depth_normalize)")
    valid = frame.valid_depth()
    if not valid.any():
        raise DegenerateInputError("no valid depth pixels to back-project")
    fx, fy, cx, cy = frame.intrinsics
    rr, cc = np.nonzero(valid)
    d = frame.depth[rr, cc].astype(np.float64)
    u = cc + frame.crop_origin[1]
    v = rr + frame.crop_origin[0]
    x = (u - cx) * d / fx
    y = (v - cy) * d / fy
    return np.stack([x, y, d], axis=1)


def to_tensor(frame: RgbdFrame, depth_only: bool = False) -> np.ndarray:
    """Network input: (4, 304, 304) float32 (or (1, ...) depth-only)."""
    if not frame.depth_normalized:
        raise ValueError("normalize depth before building the network input")
    depth = frame.depth[None]
    if depth_only:
        return depth.astype(np.float32)
    return np.concatenate([frame.rgb, depth], axis=0).astype(np.float32)
