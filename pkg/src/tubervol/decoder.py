"""Latent-coded signed-distance decoder: model, training, reconstruction.

One MLP represents the whole shape family; a per-shape latent code
conditions it. Training jointly optimizes the codes and the weights on
clamped SDF samples; inference either predicts a code with the encoder or
recovers one by gradient descent against partial observations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nn
from .errors import DivergenceError, EmptyReconstructionError, ShapeMismatchError
from .geom import (
    CANONICAL_SCALE_MM,
    CanonicalTransform,
    SdfSampleSet,
    TriangleMesh,
    convex_hull,
    loop_subdivide,
    mesh_volume,
    watertight_repair,
)
from .geom.marching import grid_points
from .validation import as_rng

LATENT_SIZES = (8, 16, 32, 64, 128, 256)
DECODER_HIDDEN = 512
DECODER_LAYERS = 9


class SdfDecoder:
    """Nine dense layers, hidden width 512 by default; the first layer takes
    the latent code concatenated with an xyz query point, ReLU between
    layers, tanh on the scalar output so predictions stay in [-1, 1]."""

    def __init__(self, latent_size: int, hidden: int = DECODER_HIDDEN,
                 n_layers: int = DECODER_LAYERS, dtype=np.float32, seed=0):
        self.latent_size = int(latent_size)
        self.hidden = int(hidden)
        self.n_layers = int(n_layers)
        self.dtype = np.dtype(dtype)
        rng = as_rng(seed)
        dims = [self.latent_size + 3] + [self.hidden] * (self.n_layers - 1) + [1]
        self.params = nn.ParameterSet()
        for i, (din, dout) in enumerate(zip(dims[:-1], dims[1:])):
            self.params.add(f"fc{i}.w", nn.uniform_init(rng, (din, dout), din, self.dtype))
            self.params.add(f"fc{i}.b", np.zeros(dout, dtype=self.dtype))

    def forward(self, features: nn.DiffTensor) -> nn.DiffTensor:
        """features: (n, latent_size + 3) -> (n, 1) tracked output."""
        h = features
        for i in range(self.n_layers):
            h = nn.dense(h, self.params[f"fc{i}.w"], self.params[f"fc{i}.b"])
            if i < self.n_layers - 1:
                h = nn.relu(h)
        return nn.tanh(h)

    def query(self, latent: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Fast inference path: plain matmuls, no tape. Returns (n,)."""
        latent = np.asarray(latent, dtype=self.dtype).ravel()
        if latent.shape != (self.latent_size,):
            raise ShapeMismatchError(
                f"latent length {latent.shape[0]} does not match model ({self.latent_size})"
            )
        points = np.asarray(points, dtype=self.dtype).reshape(-1, 3)
        h = np.concatenate(
            [np.broadcast_to(latent, (len(points), self.latent_size)), points], axis=1
        )
        for i in range(self.n_layers):
            h = h @ self.params[f"fc{i}.w"].values + self.params[f"fc{i}.b"].values
            if i < self.n_layers - 1:
                np.maximum(h, 0.0, out=h)
        return np.tanh(h[:, 0])

    def state_copy(self) -> nn.ParameterSet:
        return self.params.copy()

    def load_state(self, params: nn.ParameterSet) -> None:
        self.params.load_values(params)


def decoder_forward(model: SdfDecoder, latent, xyz) -> float:
    """Signed distance prediction for one latent code and one query point."""
    return float(model.query(latent, np.asarray(xyz, dtype=np.float64).reshape(1, 3))[0])


def save_decoder(path, model: SdfDecoder, extra_meta: dict | None = None) -> None:
    meta = {"kind": "sdf-decoder", "latent_size": model.latent_size,
            "hidden": model.hidden, "n_layers": model.n_layers}
    meta.update(extra_meta or {})
    nn.save_checkpoint(path, model.params, meta)


def load_decoder(path) -> SdfDecoder:
    params, meta = nn.load_checkpoint(path)
    if meta.get("kind") != "sdf-decoder":
        raise nn.CheckpointError(f"{path} is not a decoder checkpoint")
    model = SdfDecoder(meta["latent_size"], hidden=meta["hidden"],
                       n_layers=meta.get("n_layers", DECODER_LAYERS), seed=0)
    model.load_state(params)
    return model


class LatentTable:
    """Mapping tuber id -> latent code; all codes share one length."""

    def __init__(self, codes: dict[str, np.ndarray]):
        self._codes = {str(k): np.asarray(v, dtype=np.float64).ravel() for k, v in codes.items()}
        lengths = {len(v) for v in self._codes.values()}
        if len(lengths) > 1:
            raise ShapeMismatchError(f"latent codes have mixed lengths {sorted(lengths)}")
        for key, vec in self._codes.items():
            if not np.isfinite(vec).all():
                raise ValueError(f"latent code for {key!r} is not finite")

    def __getitem__(self, tuber_id: str) -> np.ndarray:
        return self._codes[str(tuber_id)]

    def __contains__(self, tuber_id) -> bool:
        return str(tuber_id) in self._codes

    def __len__(self) -> int:
        return len(self._codes)

    def ids(self):
        return list(self._codes)

    def items(self):
        return self._codes.items()

    @property
    def latent_size(self) -> int:
        return len(next(iter(self._codes.values())))

    def save_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id"] + [f"v{i}" for i in range(self.latent_size)])
            for key, vec in self._codes.items():
                writer.writerow([key] + [f"{x:.9g}" for x in vec])

    @classmethod
    def load_csv(cls, path) -> "LatentTable":
        with Path(path).open() as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[0] != "id":
                raise ValueError("latent table CSV must start with an 'id' column")
            codes = {row[0]: np.array(row[1:], dtype=np.float64) for row in reader}
        return cls(codes)


@dataclass
class DecoderTrainConfig:
    latent_size: int = 32
    hidden: int = DECODER_HIDDEN
    epochs: int = 1001
    base_lr: float = 5e-4
    latent_lr_multiplier: float = 2.0  # codes move faster than weights
    lr_halving_interval: int = 300
    snapshot_interval: int = 10
    samples_per_shape: int = 3072
    shapes_per_batch: int = 1
    latent_init_sigma: float = 0.01
    seed: int = 0
    workdir: str | None = None


@dataclass
class DecoderSnapshot:
    epoch: int
    params: nn.ParameterSet
    latents: LatentTable


@dataclass
class DecoderTrainResult:
    model: SdfDecoder
    latent_table: LatentTable
    snapshots: list[DecoderSnapshot]
    log: list[dict]  # epoch, lr, loss

    @property
    def transform_scale(self) -> float:
        return CANONICAL_SCALE_MM


def train_decoder(shapes, config: DecoderTrainConfig) -> DecoderTrainResult:
    """Jointly optimize decoder weights and one latent code per shape with
    Adam on an L1 loss over clamped SDF targets.

    ``shapes``: sequence of (tuber_id, SdfSampleSet). The learning rate
    halves every ``lr_halving_interval`` epochs and a snapshot (weights +
    latent table) is kept every ``snapshot_interval`` epochs, including
    epoch 0. Bit-reproducible for a fixed seed.
    """
    shapes = list(shapes)
    if not shapes:
        raise ValueError("train_decoder needs at least one shape")
    ids = [str(sid) for sid, _ in shapes]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate shape ids")

    nn.tune_allocator()
    rng = as_rng(config.seed)
    model = SdfDecoder(config.latent_size, hidden=config.hidden, seed=rng)
    latents_init = rng.normal(0.0, config.latent_init_sigma,
                              size=(len(shapes), config.latent_size)).astype(model.dtype)
    latent_group = nn.ParameterSet()
    latent_param = latent_group.add("latents", latents_init)

    positions = [s.positions.astype(model.dtype) for _, s in shapes]
    targets = [s.sdf.astype(model.dtype) for _, s in shapes]

    schedule = nn.Schedule("step-halving", config.base_lr, step_interval=config.lr_halving_interval)
    workdir = Path(config.workdir) if config.workdir else None
    if workdir:
        workdir.mkdir(parents=True, exist_ok=True)

    snapshots: list[DecoderSnapshot] = []
    log: list[dict] = []

    def snapshot(epoch: int) -> None:
        table = LatentTable({sid: latent_param.values[i].astype(np.float64)
                             for i, sid in enumerate(ids)})
        snap = DecoderSnapshot(epoch=epoch, params=model.state_copy(), latents=table)
        snapshots.append(snap)
        if workdir:
            nn.save_checkpoint(workdir / f"decoder_{epoch:05d}.ckpt", model.params,
                               {"epoch": epoch, "seed": config.seed,
                                "latent_size": config.latent_size, "hidden": config.hidden})
            table.save_csv(workdir / f"latents_{epoch:05d}.csv")

    n_shapes = len(shapes)
    for epoch in range(config.epochs):
        lr = nn.schedule_lr(schedule, epoch)
        order = rng.permutation(n_shapes)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n_shapes, config.shapes_per_batch):
            chunk = order[start : start + config.shapes_per_batch]
            rows = []
            feats = []
            targs = []
            for si in chunk:
                n_avail = len(targets[si])
                take = min(config.samples_per_shape, n_avail)
                pick = rng.choice(n_avail, size=take, replace=False)
                feats.append(positions[si][pick])
                targs.append(targets[si][pick])
                rows.append(np.full(take, si, dtype=np.int64))
            xyz = np.concatenate(feats)
            sdf_t = np.concatenate(targs)[:, None]
            row_idx = np.concatenate(rows)

            model.params.zero_grads()
            latent_group.zero_grads()
            lat = nn.gather_rows(latent_param, row_idx)
            features = nn.concat_columns(lat, nn.DiffTensor(xyz))
            pred = model.forward(features)
            loss = nn.l1_loss(pred, sdf_t)
            value = loss.item()
            if not np.isfinite(value):
                raise DivergenceError(f"decoder training diverged at epoch {epoch}", epoch=epoch)
            loss.backward()
            nn.adam_step(model.params, lr)
            nn.adam_step(latent_group, lr * config.latent_lr_multiplier)
            epoch_loss += value
            n_batches += 1

        log.append({"epoch": epoch, "lr": lr, "loss": epoch_loss / max(n_batches, 1)})
        if epoch % config.snapshot_interval == 0:
            snapshot(epoch)

    table = LatentTable({sid: latent_param.values[i].astype(np.float64)
                         for i, sid in enumerate(ids)})
    return DecoderTrainResult(model=model, latent_table=table, snapshots=snapshots, log=log)


def evaluate_l1(model: SdfDecoder, latent_table: LatentTable, shapes) -> float:
    """Mean absolute SDF error over every sample of every shape."""
    total = 0.0
    count = 0
    for sid, samples in shapes:
        pred = model.query(latent_table[sid], samples.positions)
        total += float(np.abs(pred - samples.sdf).sum())
        count += len(samples)
    return total / max(count, 1)


def optimize_latent(model: SdfDecoder, samples: SdfSampleSet, iterations: int = 300,
                    lr: float = 5e-3, seed=0, init_sigma: float = 0.01) -> np.ndarray:
    """Recover a latent code for a frozen decoder from (partial) SDF samples.

    Adam on the L1 loss over the given samples, latent-only. Returns the
    best code seen, so the final loss never exceeds the initial one.
    """
    if len(samples) < 10:
        raise ValueError("optimize_latent needs at least 10 samples")
    rng = as_rng(seed)
    code = rng.normal(0.0, init_sigma, size=model.latent_size).astype(model.dtype)
    if iterations <= 0:
        return code.astype(np.float64)

    xyz = samples.positions.astype(model.dtype)
    target = samples.sdf.astype(model.dtype)[:, None]
    opt = nn.ParameterSet()
    latent = opt.add("latent", code[None, :])

    best_loss = np.inf
    best = code.copy()
    for it in range(iterations):
        opt.zero_grads()
        lat = nn.gather_rows(latent, np.zeros(len(xyz), dtype=np.int64))
        pred = model.forward(nn.concat_columns(lat, nn.DiffTensor(xyz)))
        loss = nn.l1_loss(pred, target)
        value = loss.item()
        if not np.isfinite(value):
            raise DivergenceError(f"latent optimization diverged at iteration {it}")
        if value < best_loss:
            best_loss = value
            best = latent.values[0].copy()
        loss.backward()
        nn.adam_step(opt, lr)
    return best.astype(np.float64)


@dataclass
class Reconstruction:
    points: np.ndarray  # completed point cloud, world frame (mm)
    mesh: TriangleMesh  # watertight, world frame (mm)
    volume_ml: float


def reconstruct(model: SdfDecoder, latent, transform: CanonicalTransform | None = None,
                grid_resolution: int = 40, subdivision_iterations: int = 1,
                refine_surface: bool = True) -> Reconstruction:
    """Frame-independent mesh recovery from one latent code.

    Evaluates the decoder on a regular grid over [-1, 1]^3, keeps the
    points with predicted distance <= 0, hulls them, optionally projects
    the hull vertices onto the decoder's zero level set (suppresses the
    grid-quantization volume bias), then smooths with one Loop pass and
    guarantees watertightness before converting back to millimeters.
    """
    if transform is None:
        transform = CanonicalTransform(scale=CANONICAL_SCALE_MM, offset=np.zeros(3))
    latent = np.asarray(latent, dtype=np.float64).ravel()
    pts = grid_points(grid_resolution)
    values = model.query(latent, pts)
    keep = values <= 0.0
    if not keep.any():
        raise EmptyReconstructionError("empty reconstruction")
    keep = _largest_component(keep.reshape((grid_resolution,) * 3)).ravel()
    inside = pts[keep]

    try:
        hull = convex_hull(inside)
    except Exception as exc:
        raise EmptyReconstructionError("empty reconstruction") from exc

    spacing = 2.0 / (grid_resolution - 1)
    if refine_surface:
        hull = TriangleMesh(
            _project_to_surface(model, latent, hull.vertices, inside.mean(axis=0), spacing),
            hull.triangles,
        )
    mesh = loop_subdivide(hull, subdivision_iterations)
    if refine_surface and subdivision_iterations > 0:
        mesh = TriangleMesh(
            _project_to_surface(model, latent, mesh.vertices, inside.mean(axis=0), spacing),
            mesh.triangles,
        )
    mesh = watertight_repair(mesh)
    world = transform.mesh_to_world(mesh)
    return Reconstruction(
        points=transform.to_world(inside), mesh=world, volume_ml=mesh_volume(world)
    )


def _largest_component(inside: np.ndarray) -> np.ndarray:
    """Noise suppression: keep only the biggest 26-connected blob of
    inside-classified grid points (stray negative responses far from the
    object would otherwise blow up the hull)."""
    from scipy import ndimage

    labels, n = ndimage.label(inside, structure=np.ones((3, 3, 3), dtype=np.int8))
    if n <= 1:
        return inside
    counts = np.bincount(labels.ravel())
    counts[0] = 0
    return labels == counts.argmax()


def _project_to_surface(model: SdfDecoder, latent: np.ndarray, verts: np.ndarray,
                        center: np.ndarray, spacing: float, steps: int = 8) -> np.ndarray:
    """Push vertices outward along rays from the shape center onto the
    decoder's zero crossing (bisection; vertices without a bracket stay)."""
    rays = verts - center
    norms = np.linalg.norm(rays, axis=1, keepdims=True)
    rays = rays / np.maximum(norms, 1e-12)

    lo = np.zeros(len(verts))
    hi = np.full(len(verts), np.nan)
    for factor in (0.5, 1.0, 1.5, 2.0):
        probe = verts + rays * (factor * spacing)
        vals = model.query(latent, probe)
        fresh = np.isnan(hi) & (vals > 0)
        hi[fresh] = factor * spacing
        lo[np.isnan(hi) & (vals <= 0)] = factor * spacing
    have = ~np.isnan(hi)
    if not have.any():
        return verts
    lo_h = lo[have]
    hi_h = hi[have]
    v_h = verts[have]
    r_h = rays[have]
    for _ in range(steps):
        mid = 0.5 * (lo_h + hi_h)
        vals = model.query(latent, v_h + r_h * mid[:, None])
        inside = vals <= 0
        lo_h = np.where(inside, mid, lo_h)
        hi_h = np.where(inside, hi_h, mid)
    out = verts.copy()
    out[have] = v_h + r_h * (0.5 * (lo_h + hi_h))[:, None]
    return out


def interpolate_latents(a, b, steps: int = 7) -> list[np.ndarray]:
    """``steps`` evenly spaced codes strictly between a and b (endpoints
    excluded): coefficients k/(steps+1) for k = 1..steps."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ShapeMismatchError(f"latent lengths differ: {a.shape} vs {b.shape}")
    return [a + (k / (steps + 1)) * (b - a) for k in range(1, steps + 1)]


def select_decoder_checkpoint(snapshots, validation_shapes, chamfer_fn=None,
                              opt_iterations: int = 150, opt_lr: float = 5e-3,
                              grid_resolution: int = 32, n_surface: int = 2048,
                              seed: int = 0) -> DecoderSnapshot:
    """Pick the snapshot with the lowest mean validation completion error.

    For every snapshot and validation shape, a fresh latent is optimized
    against the shape's SDF samples, the shape is reconstructed, and the
    squared-distance completion error against ground-truth surface samples
    is averaged. Ties go to the earliest epoch.
    """
    from .metrics import chamfer
    from .geom import surface_samples

    if chamfer_fn is None:
        chamfer_fn = chamfer
    snapshots = list(snapshots)
    if not snapshots:
        raise ValueError("no snapshots to select from")
    if len(snapshots) == 1:
        return snapshots[0]

    validation_shapes = list(validation_shapes)
    best = None
    best_score = np.inf
    for snap in snapshots:
        n_layers = sum(1 for name in snap.params.names() if name.endswith(".w"))
        model = SdfDecoder(
            latent_size=snap.latents.latent_size,
            hidden=snap.params["fc0.w"].values.shape[1],
            n_layers=n_layers,
            seed=0,
        )
        model.load_state(snap.params)
        scores = []
        for i, (sid, samples, gt_mesh) in enumerate(validation_shapes):
            code = optimize_latent(model, samples, iterations=opt_iterations, lr=opt_lr,
                                   seed=seed + i)
            try:
                recon = reconstruct(model, code, samples.transform,
                                    grid_resolution=grid_resolution)
            except EmptyReconstructionError:
                scores.append(np.inf)
                continue
            gt_pts = surface_samples(gt_mesh, n_surface, seed=seed)
            pred_pts = surface_samples(recon.mesh, n_surface, seed=seed)
            gt_pts = gt_pts - gt_pts.mean(axis=0)
            pred_pts = pred_pts - pred_pts.mean(axis=0)
            scores.append(chamfer_fn(gt_pts, pred_pts))
        score = float(np.mean(scores))
        if score < best_score:
            best_score = score
            best = snap
    return best
