"""Tuber records, split manifests, and the on-disk dataset layout.

Layout (one directory per tuber):

    <root>/splits.csv                  tuber_id,split
    <root>/<tuber_id>/mesh.ply         ground-truth watertight mesh (mm)
    <root>/<tuber_id>/meta.json        cultivar, intrinsics, per-frame info
    <root>/<tuber_id>/frames/NNN_rgb.png    8-bit, 3 channels
    <root>/<tuber_id>/frames/NNN_depth.png  16-bit, value = millimeters
    <root>/<tuber_id>/frames/NNN_mask.png   8-bit, 0 or 255

``load_dataset`` accepts a mapping dict that renames these paths so an
externally published dataset can be adapted without conversion; see
DEFAULT_LAYOUT for the overridable keys.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import TubervolError
from ..geom import TriangleMesh, is_watertight, load_ply, mesh_volume, save_ply
from .frames import RgbdFrame

SPLITS = ("train", "val", "test")
SPLIT_RATIOS = (0.70, 0.15, 0.15)

DEFAULT_LAYOUT = {
    "mesh": "mesh.ply",
    "meta": "meta.json",
    "rgb": "frames/{index:03d}_rgb.png",
    "depth": "frames/{index:03d}_depth.png",
    "mask": "frames/{index:03d}_mask.png",
    "splits": "splits.csv",
    "depth_unit_mm": 1.0,  # multiply stored depth values by this to get mm
}


@dataclass
class TuberRecord:
    tuber_id: str
    cultivar: str
    mesh: TriangleMesh
    volume_ml: float
    frames: list[RgbdFrame] = field(default_factory=list)
    split: str = "train"

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")
        if not is_watertight(self.mesh):
            raise TubervolError(f"ground-truth mesh for {self.tuber_id!r} is not watertight")
        actual = mesh_volume(self.mesh)
        if abs(actual - self.volume_ml) > 1e-6 * max(actual, 1.0):
            raise TubervolError(
                f"stored volume {self.volume_ml} deviates from mesh volume {actual}"
            )


class SplitManifest:
    """tuber_id -> split assignment; every tuber in exactly one split."""

    def __init__(self, assignment: dict[str, str]):
        for tid, split in assignment.items():
            if split not in SPLITS:
                raise ValueError(f"unknown split {split!r} for {tid!r}")
        self._assignment = dict(assignment)

    def __getitem__(self, tuber_id: str) -> str:
        return self._assignment[tuber_id]

    def __len__(self) -> int:
        return len(self._assignment)

    def items(self):
        return self._assignment.items()

    def ids(self, split: str) -> list[str]:
        return [tid for tid, s in self._assignment.items() if s == split]

    @classmethod
    def from_ids(cls, ids, seed=0) -> "SplitManifest":
        """70/15/15 split by tuber (never by frame), shuffled by seed."""
        ids = [str(i) for i in ids]
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(ids))
        n_train = int(np.floor(SPLIT_RATIOS[0] * len(ids)))
        n_val = int(np.floor(SPLIT_RATIOS[1] * len(ids)))
        assignment = {}
        for pos, idx in enumerate(order):
            if pos < n_train:
                split = "train"
            elif pos < n_train + n_val:
                split = "val"
            else:
                split = "test"
            assignment[ids[idx]] = split
        return cls(assignment)

    def save_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tuber_id", "split"])
            for tid, split in self._assignment.items():
                writer.writerow([tid, split])

    @classmethod
    def load_csv(cls, path) -> "SplitManifest":
        with Path(path).open() as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["tuber_id", "split"]:
                raise TubervolError("splits.csv must have a tuber_id,split header")
            return cls({row[0]: row[1] for row in reader if row})


def records_for_split(records, split: str) -> list[TuberRecord]:
    return [r for r in records if r.split == split]


def save_dataset(root, records) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    manifest = SplitManifest({r.tuber_id: r.split for r in records})
    manifest.save_csv(root / DEFAULT_LAYOUT["splits"])
    for record in records:
        tdir = root / record.tuber_id
        (tdir / "frames").mkdir(parents=True, exist_ok=True)
        save_ply(tdir / DEFAULT_LAYOUT["mesh"], record.mesh)
        frames_meta = []
        for frame in record.frames:
            idx = frame.frame_index
            rgb8 = np.clip(frame.rgb * 255.0, 0, 255).astype(np.uint8).transpose(1, 2, 0)
            Image.fromarray(rgb8, mode="RGB").save(tdir / DEFAULT_LAYOUT["rgb"].format(index=idx))
            depth16 = np.clip(np.round(frame.depth), 0, 65535).astype(np.uint16)
            Image.fromarray(depth16, mode="I;16").save(
                tdir / DEFAULT_LAYOUT["depth"].format(index=idx)
            )
            mask8 = (frame.mask * np.uint8(255)).astype(np.uint8)
            Image.fromarray(mask8, mode="L").save(tdir / DEFAULT_LAYOUT["mask"].format(index=idx))
            frames_meta.append(
                {
                    "index": idx,
                    "centroid_row": int(frame.centroid_row),
                    "crop_origin": [int(frame.crop_origin[0]), int(frame.crop_origin[1])],
                }
            )
        meta = {
            "tuber_id": record.tuber_id,
            "cultivar": record.cultivar,
            "volume_ml": record.volume_ml,
            "intrinsics": list(record.frames[0].intrinsics) if record.frames else list(),
            "frames": frames_meta,
        }
        (tdir / DEFAULT_LAYOUT["meta"]).write_text(json.dumps(meta, indent=1))


def load_dataset(root, mapping: dict | None = None) -> list[TuberRecord]:
    root = Path(root)
    layout = dict(DEFAULT_LAYOUT)
    if mapping:
        layout.update(mapping)
    manifest = SplitManifest.load_csv(root / layout["splits"])
    unit = float(layout["depth_unit_mm"])

    records = []
    for tuber_id, split in manifest.items():
        tdir = root / tuber_id
        meta = json.loads((tdir / layout["meta"]).read_text())
        mesh = load_ply(tdir / layout["mesh"])
        intrinsics = tuple(meta.get("intrinsics") or (0.0, 0.0, 0.0, 0.0))
        frames = []
        for fmeta in meta.get("frames", []):
            idx = int(fmeta["index"])
            rgb = np.asarray(Image.open(tdir / layout["rgb"].format(index=idx)), dtype=np.float32)
            depth = np.asarray(
                Image.open(tdir / layout["depth"].format(index=idx)), dtype=np.float32
            )
            mask = np.asarray(Image.open(tdir / layout["mask"].format(index=idx)))
            frames.append(
                RgbdFrame(
                    rgb=rgb.transpose(2, 0, 1) / 255.0,
                    depth=depth * unit,
                    mask=mask > 127,
                    tuber_id=tuber_id,
                    cultivar=meta.get("cultivar", "Synthetic"),
                    centroid_row=int(fmeta.get("centroid_row", 0)),
                    intrinsics=intrinsics,
                    crop_origin=tuple(fmeta.get("crop_origin", (0, 0))),
                    frame_index=idx,
                )
            )
        records.append(
            TuberRecord(
                tuber_id=tuber_id,
                cultivar=meta.get("cultivar", "Synthetic"),
                # recompute: float32 storage shifts the stored value past
                # the record's own volume-consistency tolerance
                mesh=mesh,
                volume_ml=mesh_volume(mesh),
                frames=frames,
                split=split,
            )
        )
    return records
