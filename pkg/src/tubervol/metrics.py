"""Point-cloud and volume metrics plus shape descriptors.

The completion distance follows the squared-norm sum-of-means convention:

    d(G, S) = mean_x min_y ||x - y||^2 + mean_y min_x ||y - x||^2

Reports label this column d_CD. Note the convention is quadratic in the
coordinate unit even though it is conventionally quoted in millimeters;
the library computes the formula literally and keeps the label as-is.
Precision/recall/F-score use plain Euclidean distances with a strict
``< d`` test at the 5 mm default threshold.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateInputError
from .geom import TriangleMesh, convex_hull, oriented_bbox, surface_samples
from .validation import ensure_points

FSCORE_DISTANCE_MM = 5.0
REGION_EDGES = (0, 100, 150, 200, 250, 300, 350, 400, 450, 500, 550, 600, 650, 720)
CONCAVITY_SAMPLES = 10_000
CONCAVITY_SEED = 7


def _nearest_sq(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Squared distance from each src point to its nearest dst point,
    recomputed from the matched pair so it is bit-identical to a
    brute-force all-pairs scan."""
    _, idx = cKDTree(dst).query(src)
    diff = src - dst[idx]
    return (diff**2).sum(axis=1)


def chamfer(g, s) -> float:
    """Symmetric squared-distance completion error between two clouds."""
    g = ensure_points(g, name="G")
    s = ensure_points(s, name="S")
    return float(np.mean(_nearest_sq(g, s)) + np.mean(_nearest_sq(s, g)))


def precision_recall_fscore(g, s, d: float = FSCORE_DISTANCE_MM):
    """Percent of reconstructed points within d of the truth (precision),
    percent of truth points within d of the reconstruction (recall), and
    their harmonic mean."""
    if d <= 0:
        raise ValueError("distance threshold must be positive")
    g = ensure_points(g, name="G")
    s = ensure_points(s, name="S")
    dist_s = np.sqrt(_nearest_sq(s, g))
    dist_g = np.sqrt(_nearest_sq(g, s))
    precision = 100.0 * np.mean(dist_s < d)
    recall = 100.0 * np.mean(dist_g < d)
    if precision + recall == 0.0:
        return 0.0, 0.0, 0.0
    fscore = 2.0 * precision * recall / (precision + recall)
    return float(precision), float(recall), float(fscore)


def rmse_volume(pairs) -> float:
    """Root mean squared error over (estimated, true) volume pairs (ml)."""
    arr = np.asarray(pairs, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) == 0:
        raise DegenerateInputError("rmse_volume expects a non-empty (n, 2) pair array")
    est, true = arr[:, 0], arr[:, 1]
    return float(np.sqrt(np.mean((est - true) ** 2)))


def relative_error(pairs) -> float:
    """Mean |estimated - true| / true, in percent."""
    arr = np.asarray(pairs, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) == 0:
        raise DegenerateInputError("relative_error expects a non-empty (n, 2) pair array")
    est, true = arr[:, 0], arr[:, 1]
    if (true <= 0).any():
        raise DegenerateInputError("true volumes must be positive")
    return float(np.mean(np.abs(est - true) / true) * 100.0)


@dataclass(frozen=True)
class ShapeDescriptors:
    """elongation: longest / shortest oriented-box extent (>= 1);
    concavity: completion distance between the surface and its convex
    hull (0 for convex shapes, grows with surface valleys)."""

    elongation: float
    concavity: float


def shape_descriptors(mesh: TriangleMesh) -> ShapeDescriptors:
    obb = oriented_bbox(mesh.vertices)
    elongation = float(obb.extents[0] / obb.extents[2])
    hull = convex_hull(mesh.vertices)
    a = surface_samples(mesh, CONCAVITY_SAMPLES, seed=CONCAVITY_SEED)
    b = surface_samples(hull, CONCAVITY_SAMPLES, seed=CONCAVITY_SEED)
    return ShapeDescriptors(elongation=elongation, concavity=float(chamfer(a, b)))


def assign_region(centroid_row: int) -> int:
    """Horizontal image band (1..13) for a full-image pixel row; the first
    band covers rows 0-100, then 50-pixel bands, then 650-720. Boundary
    rows belong to the upper band."""
    row = float(centroid_row)
    if row < 0 or row >= REGION_EDGES[-1]:
        raise ValueError(f"row {centroid_row} outside [0, {REGION_EDGES[-1]})")
    return int(np.searchsorted(REGION_EDGES, row, side="right"))


@dataclass
class MetricReport:
    """One evaluation row: a group key plus the shared metric column set."""

    group: str
    count: int = 0
    chamfer: float = float("nan")
    precision_pct: float = float("nan")
    recall_pct: float = float("nan")
    fscore_pct: float = float("nan")
    rmse_ml: float = float("nan")
    rel_error_pct: float = float("nan")
    mean_time_ms: float = float("nan")
    elongation: float = float("nan")
    concavity: float = float("nan")
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        for v in (self.precision_pct, self.recall_pct, self.fscore_pct):
            if np.isfinite(v) and not (0.0 <= v <= 100.0):
                raise ValueError(f"percentage out of range in report {self.group!r}")
        if np.isfinite(self.rmse_ml) and self.rmse_ml < 0:
            raise ValueError("rmse must be >= 0")


def write_reports_csv(path, reports) -> None:
    reports = list(reports)
    names = [f.name for f in fields(MetricReport) if f.name != "extra"]
    extra_keys = sorted({k for r in reports for k in r.extra})
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names + extra_keys)
        for r in reports:
            row = [getattr(r, n) for n in names]
            row += [r.extra.get(k, "") for k in extra_keys]
            writer.writerow(row)


def summarize_completion(gt_points, pred_points, d: float = FSCORE_DISTANCE_MM):
    """chamfer + precision/recall/fscore in one pass, centroid-aligned."""
    gt = ensure_points(gt_points)
    pred = ensure_points(pred_points)
    gt = gt - gt.mean(axis=0)
    pred = pred - pred.mean(axis=0)
    p, r, f = precision_recall_fscore(gt, pred, d)
    return {"chamfer": chamfer(gt, pred), "precision_pct": p, "recall_pct": r, "fscore_pct": f}
