"""Dataset ingestion, preprocessing, augmentation, synthetic generation."""

from .augment import augment_frame, augment_shape
from .dataset import (
    DEFAULT_LAYOUT,
    SPLIT_RATIOS,
    SPLITS,
    SplitManifest,
    TuberRecord,
    load_dataset,
    records_for_split,
    save_dataset,
)
from .frames import (
    DEFAULT_INTRINSICS,
    FRAME_SIZE,
    RgbdFrame,
    clip_and_mask,
    depth_filter,
    depth_normalize,
    frame_to_pointcloud,
    preprocess,
    to_tensor,
)
from .synth import SynthConfig, TuberShape, synth_generate

__all__ = [
    "DEFAULT_INTRINSICS",
    "DEFAULT_LAYOUT",
    "FRAME_SIZE",
    "RgbdFrame",
    "SPLITS",
    "SPLIT_RATIOS",
    "SplitManifest",
    "SynthConfig",
    "TuberRecord",
    "TuberShape",
    "augment_frame",
    "augment_shape",
    "clip_and_mask",
    "depth_filter",
    "depth_normalize",
    "frame_to_pointcloud",
    "load_dataset",
    "preprocess",
    "records_for_split",
    "save_dataset",
    "synth_generate",
    "to_tensor",
]
