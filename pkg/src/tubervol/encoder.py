"""Convolutional RGB-D encoder: architecture, ablations, and training.

Seven blocks of (3x3 conv, LeakyReLU 0.2, 4x4/stride-2 max pool) take the
masked 4x304x304 frame down to 1024x2x2; a flatten and one dense layer
emit the latent code. Ablation flags rebuild the documented variants
(pooling first, ReLU, five blocks, no pooling, depth-only input, ...).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .errors import DivergenceError, EmptyReconstructionError, ShapeMismatchError
from .validation import as_rng

INPUT_SIZE = 304
CHANNEL_SEQUENCE = (16, 32, 64, 128, 256, 512, 1024)
KERNEL = 3
LR_MULTIPLIERS = (5.0, 2.0, 1.0, 0.5, 0.2)


@dataclass(frozen=True)
class EncoderConfig:
    """Architecture + training-recipe switches.

    The defaults reproduce the reference setup; each flag toggles one
    documented ablation. ``lr_multiplier`` scales the base learning rate
    by 5, 2, 0.5 or 0.2.
    """

    latent_size: int = 32
    pool_before_activation: bool = False
    use_l1_loss: bool = False
    five_blocks: bool = False
    no_pooling: bool = False
    relu_activation: bool = False
    disable_contrastive: bool = False
    lr_multiplier: float = 1.0
    augment: bool = True
    depth_only: bool = False
    box_input: bool = False
    depth_filter: bool = True
    depth_normalize: bool = True
    core_validation: bool = False
    smoothing: bool = True

    def __post_init__(self):
        if self.five_blocks and self.no_pooling:
            raise ValueError("five_blocks and no_pooling cannot be combined")
        if self.lr_multiplier <= 0:
            raise ValueError("lr_multiplier must be positive")

    @property
    def in_channels(self) -> int:
        return 1 if self.depth_only else 4

    @property
    def channels(self) -> tuple[int, ...]:
        return CHANNEL_SEQUENCE[:5] if self.five_blocks else CHANNEL_SEQUENCE


def batch_to_nhwc(batch: np.ndarray, dtype=np.float32) -> np.ndarray:
    """(N, C, H, W) frame tensors to the channels-last layout the
    convolution kernels run on."""
    arr = np.asarray(batch, dtype=dtype)
    if arr.ndim != 4:
        raise ShapeMismatchError(f"expected a 4D frame batch, got {arr.shape}")
    return np.ascontiguousarray(arr.transpose(0, 2, 3, 1))


def _pooled_size(size: int) -> int:
    # 4x4 window, stride 2, padding 1
    return (size + 2 - 4) // 2 + 1


def spatial_trace(config: EncoderConfig) -> list[int]:
    """Spatial size after each block (304 -> ... -> 2 in the base setup)."""
    sizes = []
    s = INPUT_SIZE
    for _ in config.channels:
        if not config.no_pooling:
            s = _pooled_size(s)
        sizes.append(s)
    return sizes


def layer_parameter_counts(config: EncoderConfig) -> list[int]:
    """Trainable parameters per conv layer plus the final dense layer,
    computed without allocating anything."""
    counts = []
    c_in = config.in_channels
    for c_out in config.channels:
        counts.append(c_in * KERNEL * KERNEL * c_out + c_out)
        c_in = c_out
    flat = config.channels[-1] * spatial_trace(config)[-1] ** 2
    counts.append(flat * config.latent_size + config.latent_size)
    return counts


def total_parameter_count(config: EncoderConfig) -> int:
    return sum(layer_parameter_counts(config))


class RgbdEncoder:
    """Compresses a preprocessed RGB-D frame into a latent code."""

    def __init__(self, config: EncoderConfig | None = None, dtype=np.float32, seed=0):
        self.config = config or EncoderConfig()
        self.dtype = np.dtype(dtype)
        rng = as_rng(seed)
        self.params = nn.ParameterSet()
        c_in = self.config.in_channels
        for i, c_out in enumerate(self.config.channels):
            fan_in = c_in * KERNEL * KERNEL
            self.params.add(
                f"conv{i}.w", nn.uniform_init(rng, (c_out, c_in, KERNEL, KERNEL), fan_in, self.dtype)
            )
            self.params.add(f"conv{i}.b", np.zeros(c_out, dtype=self.dtype))
            c_in = c_out
        flat = self.config.channels[-1] * spatial_trace(self.config)[-1] ** 2
        self.params.add(
            "head.w", nn.uniform_init(rng, (flat, self.config.latent_size), flat, self.dtype)
        )
        self.params.add("head.b", np.zeros(self.config.latent_size, dtype=self.dtype))

    @property
    def latent_size(self) -> int:
        return self.config.latent_size

    def _activate(self, h: nn.DiffTensor) -> nn.DiffTensor:
        if self.config.relu_activation:
            return nn.relu(h)
        return nn.leaky_relu(h, 0.2)

    def forward(self, x: nn.DiffTensor) -> nn.DiffTensor:
        """Channels-last (N, 304, 304, C) -> (N, latent_size)."""
        expected_c = self.config.in_channels
        if x.values.ndim != 4 or x.shape[3] != expected_c or x.shape[1:3] != (INPUT_SIZE, INPUT_SIZE):
            raise ShapeMismatchError(
                f"encoder expects (n, {INPUT_SIZE}, {INPUT_SIZE}, {expected_c}), got {x.shape}"
            )
        h = x
        for i in range(len(self.config.channels)):
            h = nn.conv2d(h, self.params[f"conv{i}.w"], self.params[f"conv{i}.b"])
            if self.config.no_pooling:
                h = self._activate(h)
            elif self.config.pool_before_activation:
                h = self._activate(nn.maxpool2d(h))
            else:
                h = nn.maxpool2d(self._activate(h))
        h = nn.flatten(h)
        return nn.dense(h, self.params["head.w"], self.params["head.b"])

    def predict(self, batch: np.ndarray) -> np.ndarray:
        """Inference from channel-first (N, C, 304, 304) frame tensors."""
        nhwc = batch_to_nhwc(batch, self.dtype)
        with nn.no_grad():
            out = self.forward(nn.DiffTensor(nhwc))
        return out.values.astype(np.float64)

    def state_copy(self) -> nn.ParameterSet:
        return self.params.copy()

    def load_state(self, params: nn.ParameterSet) -> None:
        self.params.load_values(params)


def encoder_forward(model: RgbdEncoder, frame_tensor: np.ndarray) -> np.ndarray:
    """Latent code for one preprocessed (C, 304, 304) frame tensor."""
    arr = np.asarray(frame_tensor)
    if arr.ndim != 3:
        raise ShapeMismatchError(f"expected a (C, {INPUT_SIZE}, {INPUT_SIZE}) frame, got {arr.shape}")
    return model.predict(arr[None])[0]


def save_encoder(path, model: RgbdEncoder, extra_meta: dict | None = None) -> None:
    from dataclasses import asdict

    meta = {"kind": "rgbd-encoder", "config": asdict(model.config)}
    meta.update(extra_meta or {})
    nn.save_checkpoint(path, model.params, meta)


def load_encoder(path) -> RgbdEncoder:
    params, meta = nn.load_checkpoint(path)
    if meta.get("kind") != "rgbd-encoder":
        raise nn.CheckpointError(f"{path} is not an encoder checkpoint")
    model = RgbdEncoder(EncoderConfig(**meta["config"]), seed=0)
    model.load_state(params)
    return model


def build_ablation(config: EncoderConfig, seed=0) -> tuple["RgbdEncoder", dict]:
    """Construct the modified architecture plus its training-recipe notes."""
    model = RgbdEncoder(config, seed=seed)
    recipe = {
        "loss": "l1" if config.use_l1_loss else "mse",
        "contrastive": not config.disable_contrastive,
        "base_lr": 1e-4 * config.lr_multiplier,
        "augment": config.augment,
        "depth_filter": config.depth_filter,
        "depth_normalize": config.depth_normalize,
        "validation": "completion-distance" if config.core_validation else "volume-rmse",
        "subdivision_iterations": 1 if config.smoothing else 0,
        "input": "depth" if config.depth_only else "rgbd",
        "crop": "box" if config.box_input else "mask",
    }
    return model, recipe


@dataclass
class EncoderTrainConfig:
    epochs: int = 100
    base_lr: float = 1e-4
    lr_decay: float = 0.97
    batch_size: int = 16
    mse_weight: float = 1.0
    contrastive_weight: float = 0.05
    contrastive_margin: float = nn.CONTRASTIVE_MARGIN
    grid_resolution: int = 40
    subdivision_iterations: int = 1
    refine_surface: bool = True
    seed: int = 0


@dataclass
class EncoderTrainResult:
    model: "RgbdEncoder"
    best_epoch: int
    best_metric: float
    log: list[dict] = field(default_factory=list)  # per-epoch training record


def train_encoder(model: RgbdEncoder, train_examples, latent_table, decoder,
                  validation_examples, config: EncoderTrainConfig,
                  augment_fn=None) -> EncoderTrainResult:
    """Fit frames to their target latent codes with the weighted MSE +
    contrastive loss, and after every epoch run the full inference
    pipeline on the validation frames to record the volume RMSE. Returns
    the weights of the best validation epoch (earliest epoch on ties).

    ``train_examples``: sequence of (tensor (C,304,304) float32, tuber_id).
    ``validation_examples``: sequence of (tensor, true_volume_ml) pairs,
    or (tensor, gt_surface_points) when ``model.config.core_validation``
    selects the completion-distance metric instead.
    ``augment_fn(index, epoch) -> tensor`` overrides a train tensor per
    epoch (frame augmentation hooks in here).
    """
    from .decoder import reconstruct
    from .geom import marching_cubes, surface_samples
    from .metrics import chamfer

    nn.tune_allocator()
    train_examples = list(train_examples)
    for _, tid in train_examples:
        if tid not in latent_table:
            raise KeyError(f"no target latent for tuber id {tid!r}")
    targets = np.stack([latent_table[tid] for _, tid in train_examples]).astype(model.dtype)
    ids = np.array([str(tid) for _, tid in train_examples])
    tensors = [np.asarray(t, dtype=model.dtype) for t, _ in train_examples]

    schedule = nn.Schedule("exponential", config.base_lr, decay_factor=config.lr_decay)
    rng = as_rng(config.seed)
    use_l1 = model.config.use_l1_loss
    use_contrastive = not model.config.disable_contrastive

    best_metric = np.inf
    best_epoch = -1
    best_state = model.state_copy()
    log: list[dict] = []

    for epoch in range(config.epochs):
        lr = nn.schedule_lr(schedule, epoch)
        order = rng.permutation(len(tensors))
        epoch_fit = 0.0
        epoch_con = 0.0
        n_batches = 0
        for start in range(0, len(order), config.batch_size):
            pick = order[start : start + config.batch_size]
            if augment_fn is not None:
                batch = np.stack([augment_fn(int(i), epoch) for i in pick]).astype(model.dtype)
            else:
                batch = np.stack([tensors[i] for i in pick])
            model.params.zero_grads()
            pred = model.forward(nn.DiffTensor(batch_to_nhwc(batch, model.dtype)))
            fit = nn.l1_loss(pred, targets[pick]) if use_l1 else nn.mse_loss(pred, targets[pick])
            if use_contrastive and len(pick) >= 2:
                con = nn.contrastive_loss(pred, ids[pick], margin=config.contrastive_margin)
                loss = nn.combined_loss(fit, con, config.mse_weight, config.contrastive_weight)
                epoch_con += con.item()
            else:
                loss = nn.scale(fit, config.mse_weight)
            value = loss.item()
            if not np.isfinite(value):
                raise DivergenceError(f"encoder training diverged at epoch {epoch}", epoch=epoch)
            loss.backward()
            nn.adam_step(model.params, lr)
            epoch_fit += fit.item()
            n_batches += 1

        metric = _validation_metric(model, decoder, validation_examples, config,
                                    chamfer, marching_cubes, surface_samples, reconstruct)
        log.append(
            {
                "epoch": epoch,
                "train_loss": epoch_fit / max(n_batches, 1),
                "contrastive": epoch_con / max(n_batches, 1),
                "lr": lr,
                "val_metric": metric,
            }
        )
        if metric < best_metric:
            best_metric = metric
            best_epoch = epoch
            best_state = model.state_copy()

    model.load_state(best_state)
    return EncoderTrainResult(model=model, best_epoch=best_epoch, best_metric=best_metric, log=log)


def _validation_metric(model, decoder, validation_examples, config, chamfer_fn,
                       marching_fn, sample_fn, reconstruct_fn) -> float:
    from .geom import CANONICAL_SCALE_MM, CanonicalTransform, mesh_volume

    tensors = np.stack([np.asarray(t, dtype=model.dtype) for t, _ in validation_examples])
    refs = [ref for _, ref in validation_examples]
    codes = model.predict(tensors)
    transform = CanonicalTransform(scale=CANONICAL_SCALE_MM, offset=np.zeros(3))

    if model.config.core_validation:
        # reference-style selection: grid surface extraction + completion distance
        scores = []
        for code, gt_points in zip(codes, refs):
            try:
                mesh = marching_fn(lambda p: decoder.query(code, p), 32)
            except Exception:
                scores.append(np.inf)
                continue
            pred = sample_fn(transform.mesh_to_world(mesh), 2048, seed=0)
            gt = np.asarray(gt_points, dtype=np.float64)
            scores.append(chamfer_fn(gt - gt.mean(0), pred - pred.mean(0)))
        return float(np.mean(scores))

    errors = []
    for code, true_volume in zip(codes, refs):
        try:
            recon = reconstruct_fn(
                decoder, code, transform,
                grid_resolution=config.grid_resolution,
                subdivision_iterations=config.subdivision_iterations,
                refine_surface=config.refine_surface,
            )
            errors.append((recon.volume_ml - float(true_volume)) ** 2)
        except EmptyReconstructionError:
            errors.append(float(true_volume) ** 2)  # failed output counts as 0 ml
    return float(np.sqrt(np.mean(errors)))
