"""Estimator-style front doors: fit on tuber records, predict volumes.

Three models share the scikit-learn conventions (constructor params kept
verbatim, fitted state in trailing-underscore attributes, ``get_params``
for composition):

* :class:`VolumeRegressionBaseline` - ordinary least squares on oriented-
  box dimensions of the partial cloud; the accuracy bar to beat.
* :class:`DecoderOnlyCompleter` - frozen shape decoder with per-frame
  test-time latent optimization (accurate, slow).
* :class:`EncoderDecoderCompleter` - the full two-stage network; the
  encoder amortizes latent inference to milliseconds.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import nn
from .data import (
    RgbdFrame,
    augment_frame,
    augment_shape,
    depth_filter,
    depth_normalize,
    frame_to_pointcloud,
    records_for_split,
    to_tensor,
)
from .decoder import (
    DecoderTrainConfig,
    SdfDecoder,
    interpolate_latents,
    optimize_latent,
    reconstruct,
    select_decoder_checkpoint,
    train_decoder,
)
from .encoder import EncoderConfig, EncoderTrainConfig, RgbdEncoder, train_encoder
from .errors import TubervolError
from .geom import (
    CANONICAL_SCALE_MM,
    CanonicalTransform,
    SdfSampleSet,
    canonicalize,
    sample_sdf,
    surface_samples,
)
from .pipeline import CompletionResult, complete_frame, fit_baseline, predict_baseline
from .validation import as_rng


class VolumeRegressionBaseline(BaseEstimator, RegressorMixin):
    """OLS volume estimate from (length, width, depth) box dimensions."""

    def __init__(self, fit_intercept: bool = True):
        self.fit_intercept = fit_intercept

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if X.shape[1] != 3:
            raise ValueError("expected (length, width, depth) features")
        if self.fit_intercept:
            design = np.concatenate([X, np.ones((len(X), 1))], axis=1)
        else:
            design = X
        if np.linalg.matrix_rank(design) < design.shape[1]:
            raise ValueError("rank-deficient design matrix")
        beta, *_ = np.linalg.lstsq(design, y, rcond=None)
        self.coef_ = beta[:3]
        self.intercept_ = float(beta[3]) if self.fit_intercept else 0.0
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return X @ self.coef_ + self.intercept_

    def fit_records(self, records):
        """Fit from train+validation tuber records (frame box dimensions)."""
        model = fit_baseline(records)
        self.coef_ = model.coefficients
        self.intercept_ = model.intercept
        return self

    def predict_frame(self, frame: RgbdFrame) -> float:
        check_is_fitted(self, "coef_")
        from .pipeline import RegressionModel

        return predict_baseline(RegressionModel(self.coef_, self.intercept_), frame)


def _shape_samples_for_records(records, n_surface, n_uniform, noise_sigma, clamp,
                               n_augment, seed):
    """(id, SdfSampleSet) pairs for decoder training: one per record plus
    ``n_augment`` deformed copies each."""
    root = np.random.SeedSequence(seed)
    shapes = []
    for record, seq in zip(records, root.spawn(len(records))):
        streams = seq.spawn(n_augment + 2)
        meshes = [(record.tuber_id, record.mesh)]
        if n_augment > 0:
            for k, aug in enumerate(
                augment_shape(record.mesh, np.random.default_rng(streams[0]), count=n_augment)
            ):
                meshes.append((f"{record.tuber_id}#aug{k}", aug))
        for (sid, mesh), stream in zip(meshes, streams[1:]):
            canon, transform = canonicalize(mesh)
            shapes.append(
                (
                    sid,
                    sample_sdf(
                        canon,
                        n_surface=n_surface,
                        n_uniform=n_uniform,
                        noise_sigma=noise_sigma,
                        clamp=clamp,
                        seed=np.random.default_rng(stream),
                        transform=transform,
                    ),
                )
            )
    return shapes


class DecoderOnlyCompleter(BaseEstimator):
    """Shape decoder + per-frame latent optimization (no encoder).

    At publication scale this route averaged ~33 s per tuber; it is the
    accuracy reference, not the high-throughput path.
    """

    def __init__(self, latent_size: int = 32, hidden: int = 512, epochs: int = 1001,
                 base_lr: float = 5e-4, samples_per_shape: int = 3072,
                 n_surface_samples: int = 16384, n_uniform_samples: int = 4096,
                 sdf_noise_sigma: float = 0.025, sdf_clamp: float = 0.1,
                 n_shape_augment: int = 10, snapshot_interval: int = 10,
                 select_snapshot: str = "final", opt_iterations: int = 300,
                 opt_lr: float = 5e-3, grid_resolution: int = 40,
                 subdivision_iterations: int = 1, refine_surface: bool = True,
                 seed: int = 0, workdir=None):
        self.latent_size = latent_size
        self.hidden = hidden
        self.epochs = epochs
        self.base_lr = base_lr
        self.samples_per_shape = samples_per_shape
        self.n_surface_samples = n_surface_samples
        self.n_uniform_samples = n_uniform_samples
        self.sdf_noise_sigma = sdf_noise_sigma
        self.sdf_clamp = sdf_clamp
        self.n_shape_augment = n_shape_augment
        self.snapshot_interval = snapshot_interval
        self.select_snapshot = select_snapshot
        self.opt_iterations = opt_iterations
        self.opt_lr = opt_lr
        self.grid_resolution = grid_resolution
        self.subdivision_iterations = subdivision_iterations
        self.refine_surface = refine_surface
        self.seed = seed
        self.workdir = workdir

    def fit(self, records, y=None):
        train = records_for_split(records, "train")
        if not train:
            raise TubervolError("no train-split records")
        shapes = _shape_samples_for_records(
            train, self.n_surface_samples, self.n_uniform_samples,
            self.sdf_noise_sigma, self.sdf_clamp, self.n_shape_augment, self.seed,
        )
        config = DecoderTrainConfig(
            latent_size=self.latent_size, hidden=self.hidden, epochs=self.epochs,
            base_lr=self.base_lr, samples_per_shape=self.samples_per_shape,
            snapshot_interval=self.snapshot_interval, seed=self.seed,
            workdir=self.workdir,
        )
        result = train_decoder(shapes, config)
        self.decoder_ = result.model
        self.latent_table_ = result.latent_table
        self.snapshots_ = result.snapshots
        self.train_log_ = result.log
        self.train_shapes_ = shapes
        if self.select_snapshot == "completion" and len(result.snapshots) > 1:
            val = records_for_split(records, "val")
            val_shapes = [
                (r.tuber_id, s, r.mesh)
                for r, (sid, s) in zip(
                    val,
                    _shape_samples_for_records(
                        val, self.n_surface_samples, self.n_uniform_samples,
                        self.sdf_noise_sigma, self.sdf_clamp, 0, self.seed + 1,
                    ),
                )
            ]
            best = select_decoder_checkpoint(result.snapshots, val_shapes,
                                             grid_resolution=self.grid_resolution)
            self.decoder_.load_state(best.params)
            self.best_epoch_ = best.epoch
        else:
            self.best_epoch_ = result.snapshots[-1].epoch if result.snapshots else self.epochs - 1
        return self

    def frame_samples(self, frame: RgbdFrame) -> SdfSampleSet:
        """Partial observation of a frame as zero-distance surface samples
        in the canonical frame."""
        filtered = depth_filter(frame) if not frame.depth_normalized else frame
        cloud = frame_to_pointcloud(filtered)
        offset = cloud.mean(axis=0)
        transform = CanonicalTransform(scale=CANONICAL_SCALE_MM, offset=offset)
        return SdfSampleSet(
            positions=transform.to_canonical(cloud),
            sdf=np.zeros(len(cloud)),
            scale=transform.scale,
            offset=transform.offset,
        )

    def complete(self, frame: RgbdFrame, seed=0):
        check_is_fitted(self, "decoder_")
        samples = self.frame_samples(frame)
        code = optimize_latent(self.decoder_, samples, iterations=self.opt_iterations,
                               lr=self.opt_lr, seed=seed)
        return reconstruct(
            self.decoder_, code, samples.transform,
            grid_resolution=self.grid_resolution,
            subdivision_iterations=self.subdivision_iterations,
            refine_surface=self.refine_surface,
        )

    def predict(self, frames):
        return np.array([self.complete(f).volume_ml for f in frames])


class EncoderDecoderCompleter(BaseEstimator):
    """Two-stage completion network behind one ``fit``/``predict`` pair.

    ``fit`` trains the decoder on ground-truth shapes of the train split,
    picks its checkpoint, then trains the encoder against the resulting
    latent targets with volume-RMSE validation on the val split.
    """

    def __init__(self, latent_size: int = 32, decoder_hidden: int = 512,
                 decoder_epochs: int = 1001, decoder_lr: float = 5e-4,
                 decoder_snapshot_interval: int = 10, samples_per_shape: int = 3072,
                 n_surface_samples: int = 16384, n_uniform_samples: int = 4096,
                 sdf_noise_sigma: float = 0.025, sdf_clamp: float = 0.1,
                 n_shape_augment: int = 10, select_snapshot: str = "final",
                 encoder_epochs: int = 100, encoder_lr: float = 1e-4,
                 batch_size: int = 16, augment_frames: bool = True,
                 grid_resolution: int = 40, subdivision_iterations: int = 1,
                 refine_surface: bool = True, encoder_config: EncoderConfig | None = None,
                 seed: int = 0, workdir=None):
        self.latent_size = latent_size
        self.decoder_hidden = decoder_hidden
        self.decoder_epochs = decoder_epochs
        self.decoder_lr = decoder_lr
        self.decoder_snapshot_interval = decoder_snapshot_interval
        self.samples_per_shape = samples_per_shape
        self.n_surface_samples = n_surface_samples
        self.n_uniform_samples = n_uniform_samples
        self.sdf_noise_sigma = sdf_noise_sigma
        self.sdf_clamp = sdf_clamp
        self.n_shape_augment = n_shape_augment
        self.select_snapshot = select_snapshot
        self.encoder_epochs = encoder_epochs
        self.encoder_lr = encoder_lr
        self.batch_size = batch_size
        self.augment_frames = augment_frames
        self.grid_resolution = grid_resolution
        self.subdivision_iterations = subdivision_iterations
        self.refine_surface = refine_surface
        self.encoder_config = encoder_config
        self.seed = seed
        self.workdir = workdir

    def _encoder_config(self) -> EncoderConfig:
        if self.encoder_config is not None:
            return self.encoder_config
        return EncoderConfig(latent_size=self.latent_size)

    def fit(self, records, y=None):
        cfg = self._encoder_config()
        train = records_for_split(records, "train")
        val = records_for_split(records, "val")
        if not train:
            raise TubervolError("no train-split records")

        # stage 1: decoder on complete ground-truth shapes
        decoder_proxy = DecoderOnlyCompleter(
            latent_size=cfg.latent_size, hidden=self.decoder_hidden,
            epochs=self.decoder_epochs, base_lr=self.decoder_lr,
            samples_per_shape=self.samples_per_shape,
            n_surface_samples=self.n_surface_samples,
            n_uniform_samples=self.n_uniform_samples,
            sdf_noise_sigma=self.sdf_noise_sigma, sdf_clamp=self.sdf_clamp,
            n_shape_augment=self.n_shape_augment,
            snapshot_interval=self.decoder_snapshot_interval,
            select_snapshot=self.select_snapshot,
            grid_resolution=self.grid_resolution, seed=self.seed, workdir=self.workdir,
        )
        decoder_proxy.fit(records)
        self.decoder_ = decoder_proxy.decoder_
        self.latent_table_ = decoder_proxy.latent_table_
        self.decoder_log_ = decoder_proxy.train_log_

        # stage 2: encoder against the selected latent targets
        train_examples = []
        frame_refs = []
        for record in train:
            if record.tuber_id not in self.latent_table_:
                raise KeyError(f"no latent for {record.tuber_id!r}")
            for frame in record.frames:
                prepped = self._preprocess(frame, cfg)
                train_examples.append((to_tensor(prepped, cfg.depth_only), record.tuber_id))
                frame_refs.append(prepped)

        val_examples = []
        for record in val:
            for frame in record.frames:
                prepped = self._preprocess(frame, cfg)
                tensor = to_tensor(prepped, cfg.depth_only)
                if cfg.core_validation:
                    val_examples.append((tensor, surface_samples(record.mesh, 2048, seed=0)))
                else:
                    val_examples.append((tensor, record.volume_ml))
        if not val_examples:
            raise TubervolError("no val-split frames for encoder selection")

        augment_fn = None
        if self.augment_frames and cfg.augment:

            def augment_fn(index: int, epoch: int):
                stream = np.random.SeedSequence([self.seed, 0xA6, epoch, index])
                rng = np.random.default_rng(stream)
                return to_tensor(augment_frame(frame_refs[index], rng), cfg.depth_only)

        self.encoder_ = RgbdEncoder(cfg, seed=self.seed + 1)
        train_cfg = EncoderTrainConfig(
            epochs=self.encoder_epochs,
            base_lr=self.encoder_lr * cfg.lr_multiplier,
            batch_size=self.batch_size,
            grid_resolution=self.grid_resolution,
            subdivision_iterations=self.subdivision_iterations if cfg.smoothing else 0,
            refine_surface=self.refine_surface,
            seed=self.seed + 2,
        )
        result = train_encoder(self.encoder_, train_examples, self.latent_table_,
                               self.decoder_, val_examples, train_cfg, augment_fn=augment_fn)
        self.encoder_log_ = result.log
        self.best_encoder_epoch_ = result.best_epoch
        self.best_val_metric_ = result.best_metric
        return self

    def _preprocess(self, frame: RgbdFrame, cfg: EncoderConfig) -> RgbdFrame:
        out = frame
        if cfg.depth_filter and not out.depth_normalized:
            out = depth_filter(out)
        if cfg.depth_normalize:
            out = depth_normalize(out)
        else:
            # keep tensor range sane when normalization is ablated
            from dataclasses import replace

            out = replace(out, depth=(out.depth / 1000.0).astype(np.float32),
                          depth_normalized=True)
        return out

    def complete(self, frame: RgbdFrame) -> CompletionResult:
        check_is_fitted(self, "encoder_")
        cfg = self._encoder_config()
        prepped = self._preprocess(frame, cfg)
        return complete_frame(
            prepped, self.encoder_, self.decoder_,
            grid_resolution=self.grid_resolution,
            subdivision_iterations=self.subdivision_iterations if cfg.smoothing else 0,
            refine_surface=self.refine_surface,
            preprocessed=True,
        )

    def predict(self, frames):
        """Volumes (ml) for a sequence of frames."""
        return np.array([self.complete(f).volume_ml for f in frames])

    def interpolate(self, code_a, code_b, steps: int = 7):
        """Reconstructions along the latent line between two codes."""
        check_is_fitted(self, "decoder_")
        out = []
        for code in interpolate_latents(code_a, code_b, steps):
            out.append(reconstruct(
                self.decoder_, code,
                grid_resolution=self.grid_resolution,
                subdivision_iterations=self.subdivision_iterations,
                refine_surface=self.refine_surface,
            ))
        return out
