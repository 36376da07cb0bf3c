"""Experiment harness: latent sweep, interpolation gallery, size/cultivar/
region breakdowns, and the two ablation batteries.

Every experiment consumes tuber records (real or synthetic), produces
:class:`~tubervol.metrics.MetricReport` rows, and optionally writes them
as CSV plus PLY mesh galleries. Heavy experiments (sweep, ablations)
retrain models per configuration; size their configs accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import RunConfig
from .data import records_for_split
from .decoder import interpolate_latents, optimize_latent, reconstruct
from .encoder import EncoderConfig
from .errors import EmptyReconstructionError, TubervolError
from .estimators import (
    DecoderOnlyCompleter,
    EncoderDecoderCompleter,
    VolumeRegressionBaseline,
    _shape_samples_for_records,
)
from .geom import is_watertight, save_ply, surface_samples
from .metrics import (
    MetricReport,
    assign_region,
    chamfer,
    precision_recall_fscore,
    relative_error,
    rmse_volume,
    shape_descriptors,
    write_reports_csv,
)
from .pipeline import THROUGHPUT_BUDGET_MS

EXPERIMENT_KINDS = (
    "latent_sweep",
    "interpolation",
    "size_classes",
    "cultivars",
    "regions",
    "ablation_additions",
    "ablation_general",
)
LATENT_SWEEP_SIZES = (8, 16, 32, 64, 128, 256)
SIZE_CLASS_EDGES_ML = (0.0, 100.0, 150.0, 200.0, 500.0)
ACCURACY_REQUIREMENT_RMSE_ML = 31.1  # published linear-regression bar
EVAL_SURFACE_SAMPLES = 2048

ABLATION_ADDITIONS = {
    "no_depth_normalization": {"depth_normalize": False},
    "no_depth_filtering": {"depth_filter": False},
    "no_data_augmentation": {"augment": False},
    "pool_before_activation": {"pool_before_activation": True},
    "l1_loss": {"use_l1_loss": True},
    "reference_validation": {"core_validation": True},
    "no_smoothing": {"smoothing": False},
}
ABLATION_GENERAL = {
    "depth_only_input": {"depth_only": True},
    "box_instead_of_mask": {"box_input": True},
    "five_conv_blocks": {"five_blocks": True},
    "no_pooling_layers": {"no_pooling": True},
    "relu_activation": {"relu_activation": True},
    "no_contrastive_loss": {"disable_contrastive": True},
    "lr_x5": {"lr_multiplier": 5.0},
    "lr_x2": {"lr_multiplier": 2.0},
    "lr_x0.5": {"lr_multiplier": 0.5},
    "lr_x0.2": {"lr_multiplier": 0.2},
}


@dataclass
class FrameEvaluation:
    tuber_id: str
    frame_index: int
    centroid_row: int
    cultivar: str
    volume_pred: float
    volume_true: float
    chamfer: float
    precision_pct: float
    recall_pct: float
    fscore_pct: float
    time_ms: float
    watertight: bool


def evaluate_frames(model, records, split: str = "test",
                    n_surface: int = EVAL_SURFACE_SAMPLES, seed: int = 0) -> list[FrameEvaluation]:
    """Run the full pipeline on every frame of a split and score each
    completion against the ground-truth mesh (centroid-aligned clouds)."""
    rows = []
    for record in records_for_split(records, split):
        gt_cloud = surface_samples(record.mesh, n_surface, seed=seed)
        gt_centered = gt_cloud - gt_cloud.mean(axis=0)
        for frame in record.frames:
            result = model.complete(frame)
            mesh = result.mesh
            pred_cloud = surface_samples(mesh, n_surface, seed=seed)
            pred_centered = pred_cloud - pred_cloud.mean(axis=0)
            p, r, f = precision_recall_fscore(gt_centered, pred_centered)
            time_ms = result.analysis_ms if hasattr(result, "analysis_ms") else float("nan")
            rows.append(
                FrameEvaluation(
                    tuber_id=record.tuber_id,
                    frame_index=frame.frame_index,
                    centroid_row=frame.centroid_row,
                    cultivar=record.cultivar,
                    volume_pred=result.volume_ml,
                    volume_true=record.volume_ml,
                    chamfer=chamfer(gt_centered, pred_centered),
                    precision_pct=p,
                    recall_pct=r,
                    fscore_pct=f,
                    time_ms=time_ms,
                    watertight=is_watertight(mesh),
                )
            )
    if not rows:
        raise TubervolError(f"no frames in split {split!r}")
    return rows


def _report_from_rows(group: str, rows: list[FrameEvaluation], **extra) -> MetricReport:
    pairs = [(r.volume_pred, r.volume_true) for r in rows]
    report = MetricReport(
        group=group,
        count=len(rows),
        chamfer=float(np.mean([r.chamfer for r in rows])),
        precision_pct=float(np.mean([r.precision_pct for r in rows])),
        recall_pct=float(np.mean([r.recall_pct for r in rows])),
        fscore_pct=float(np.mean([r.fscore_pct for r in rows])),
        rmse_ml=rmse_volume(pairs),
        rel_error_pct=relative_error(pairs),
        mean_time_ms=float(np.mean([r.time_ms for r in rows])),
        extra=extra,
    )
    report.validate()
    return report


def _mean_descriptors(records, ids):
    descs = [shape_descriptors(r.mesh) for r in records if r.tuber_id in ids]
    if not descs:
        return float("nan"), float("nan")
    return (
        float(np.mean([d.elongation for d in descs])),
        float(np.mean([d.concavity for d in descs])),
    )


def run_size_classes(model, records, split: str = "test") -> list[MetricReport]:
    """Volume buckets 0-100 / 100-150 / 150-200 / 200-500 ml."""
    rows = evaluate_frames(model, records, split)
    reports = []
    for lo, hi in zip(SIZE_CLASS_EDGES_ML[:-1], SIZE_CLASS_EDGES_ML[1:]):
        bucket = [r for r in rows if lo <= r.volume_true < hi]
        if not bucket:
            continue
        ids = {r.tuber_id for r in bucket}
        elong, conc = _mean_descriptors(records, ids)
        report = _report_from_rows(f"{lo:.0f}-{hi:.0f} ml", bucket)
        report.elongation = elong
        report.concavity = conc
        reports.append(report)
    return reports


def run_cultivars(model, records, split: str = "test") -> list[MetricReport]:
    rows = evaluate_frames(model, records, split)
    reports = []
    for cultivar in sorted({r.cultivar for r in rows}):
        group = [r for r in rows if r.cultivar == cultivar]
        ids = {r.tuber_id for r in group}
        elong, conc = _mean_descriptors(records, ids)
        report = _report_from_rows(cultivar, group)
        report.elongation = elong
        report.concavity = conc
        reports.append(report)
    return reports


def run_regions(model, records, split: str = "test") -> list[MetricReport]:
    """Per horizontal-image-band volume RMSE (region indices 1..13)."""
    rows = evaluate_frames(model, records, split)
    reports = []
    for region in range(1, 14):
        group = [r for r in rows if assign_region(r.centroid_row) == region]
        if group:
            reports.append(_report_from_rows(f"region {region}", group))
    return reports


def run_latent_sweep(records, config: RunConfig, sizes=LATENT_SWEEP_SIZES,
                     method: str = "encoder_decoder") -> list[MetricReport]:
    """Train and evaluate one model per latent size; flag the accuracy
    (< 31.1 ml RMSE) and speed (< 16 ms) requirements per size. A fitted
    box-dimension baseline is reported alongside for desk-scale context."""
    baseline = VolumeRegressionBaseline().fit_records(records)
    base_rows = []
    for record in records_for_split(records, "test"):
        for frame in record.frames:
            base_rows.append((baseline.predict_frame(frame), record.volume_ml))
    baseline_rmse = rmse_volume(base_rows)

    reports = []
    for size in sizes:
        model = _build_model(method, size, config)
        model.fit(records)
        rows = evaluate_frames(model, records, "test")
        report = _report_from_rows(f"latent {size}", rows)
        report.extra.update(
            {
                "method": method,
                "baseline_rmse_ml": baseline_rmse,
                "meets_accuracy": report.rmse_ml < ACCURACY_REQUIREMENT_RMSE_ML,
                "meets_speed": report.mean_time_ms < THROUGHPUT_BUDGET_MS,
            }
        )
        reports.append(report)
    return reports


def _build_model(method: str, latent_size: int, config: RunConfig):
    if method == "decoder_only":
        return DecoderOnlyCompleter(
            latent_size=latent_size, hidden=config.decoder_hidden,
            epochs=config.decoder_epochs, base_lr=config.decoder_lr,
            samples_per_shape=config.samples_per_shape,
            n_surface_samples=config.n_surface_samples,
            n_uniform_samples=config.n_uniform_samples,
            sdf_noise_sigma=config.sdf_noise_sigma, sdf_clamp=config.sdf_clamp,
            n_shape_augment=config.n_shape_augment,
            snapshot_interval=config.decoder_snapshot_interval,
            select_snapshot=config.select_snapshot,
            opt_iterations=config.opt_iterations, opt_lr=config.opt_lr,
            grid_resolution=config.grid_resolution,
            subdivision_iterations=config.subdivision_iterations,
            refine_surface=config.refine_surface, seed=config.seed,
        )
    if method == "encoder_decoder":
        return completer_from_config(config, latent_size=latent_size)
    raise ValueError(f"unknown method {method!r}")


def completer_from_config(config: RunConfig, latent_size: int | None = None,
                          encoder_config: EncoderConfig | None = None) -> EncoderDecoderCompleter:
    return EncoderDecoderCompleter(
        latent_size=latent_size or config.latent_size,
        decoder_hidden=config.decoder_hidden,
        decoder_epochs=config.decoder_epochs,
        decoder_lr=config.decoder_lr,
        decoder_snapshot_interval=config.decoder_snapshot_interval,
        samples_per_shape=config.samples_per_shape,
        n_surface_samples=config.n_surface_samples,
        n_uniform_samples=config.n_uniform_samples,
        sdf_noise_sigma=config.sdf_noise_sigma,
        sdf_clamp=config.sdf_clamp,
        n_shape_augment=config.n_shape_augment,
        select_snapshot=config.select_snapshot,
        encoder_epochs=config.encoder_epochs,
        encoder_lr=config.encoder_lr,
        batch_size=config.batch_size,
        augment_frames=config.augment_frames,
        grid_resolution=config.grid_resolution,
        subdivision_iterations=config.subdivision_iterations,
        refine_surface=config.refine_surface,
        encoder_config=encoder_config,
        seed=config.seed,
    )


def run_interpolation(records, config: RunConfig, decoder=None, outdir=None,
                      steps: int = 7, seed: int = 0) -> list[MetricReport]:
    """Reconstruct ``steps`` codes between the smallest and largest test
    tubers. Validity = the reconstruction succeeds and is watertight."""
    test = records_for_split(records, "test")
    if len(test) < 2:
        raise TubervolError("interpolation needs at least two test tubers")
    smallest = min(test, key=lambda r: r.volume_ml)
    largest = max(test, key=lambda r: r.volume_ml)

    if decoder is None:
        proxy = DecoderOnlyCompleter(
            latent_size=config.latent_size, hidden=config.decoder_hidden,
            epochs=config.decoder_epochs, base_lr=config.decoder_lr,
            n_shape_augment=config.n_shape_augment, seed=config.seed,
        )
        proxy.fit(records)
        decoder = proxy.decoder_

    codes = []
    for i, record in enumerate((smallest, largest)):
        (sid, samples), = _shape_samples_for_records(
            [record], config.n_surface_samples, config.n_uniform_samples,
            config.sdf_noise_sigma, config.sdf_clamp, 0, seed + i,
        )
        codes.append(optimize_latent(decoder, samples, iterations=config.opt_iterations,
                                     lr=config.opt_lr, seed=seed + i))

    reports = []
    n_valid = 0
    for k, code in enumerate(interpolate_latents(codes[0], codes[1], steps), start=1):
        group = f"interp {k}/{steps}"
        try:
            recon = reconstruct(decoder, code, grid_resolution=config.grid_resolution,
                                subdivision_iterations=config.subdivision_iterations,
                                refine_surface=config.refine_surface)
        except EmptyReconstructionError:
            reports.append(MetricReport(group=group, count=0, extra={"valid": False}))
            continue
        valid = is_watertight(recon.mesh)
        n_valid += int(valid)
        reports.append(MetricReport(group=group, count=1,
                                    extra={"valid": valid, "volume_ml": recon.volume_ml}))
        if outdir is not None and valid:
            Path(outdir).mkdir(parents=True, exist_ok=True)
            save_ply(Path(outdir) / f"interp_{k}.ply", recon.mesh)
    summary = MetricReport(
        group="interpolation summary", count=steps,
        extra={"valid_count": n_valid,
               "endpoint_small_ml": smallest.volume_ml,
               "endpoint_large_ml": largest.volume_ml},
    )
    return [summary] + reports


def _ablation_battery(records, config: RunConfig, battery: dict, category: str):
    base_model = completer_from_config(config)
    base_model.fit(records)
    base = _report_from_rows("baseline", evaluate_frames(base_model, records, "test"))
    base.extra["category"] = "baseline"
    reports = [base]
    for name, flags in battery.items():
        enc_cfg = EncoderConfig(latent_size=config.latent_size, **flags)
        model = completer_from_config(config, encoder_config=enc_cfg)
        model.fit(records)
        report = _report_from_rows(name, evaluate_frames(model, records, "test"))
        report.extra.update(
            {
                "category": category,
                "chamfer_rel_pct": 100.0 * (report.chamfer - base.chamfer) / base.chamfer,
                "fscore_rel_pct": 100.0 * (report.fscore_pct - base.fscore_pct) / base.fscore_pct,
                "rmse_rel_pct": 100.0 * (report.rmse_ml - base.rmse_ml) / base.rmse_ml,
            }
        )
        reports.append(report)
    return reports


def run_ablation_additions(records, config: RunConfig, subset=None) -> list[MetricReport]:
    battery = {k: v for k, v in ABLATION_ADDITIONS.items() if subset is None or k in subset}
    return _ablation_battery(records, config, battery, "additions")


def run_ablation_general(records, config: RunConfig, subset=None) -> list[MetricReport]:
    battery = {k: v for k, v in ABLATION_GENERAL.items() if subset is None or k in subset}
    return _ablation_battery(records, config, battery, "general")


def run_experiment(kind: str, records, config: RunConfig, model=None, outdir=None,
                   **kwargs) -> list[MetricReport]:
    """Dispatch one experiment by name; writes ``<kind>.csv`` to outdir."""
    if kind not in EXPERIMENT_KINDS:
        raise ValueError(f"unknown experiment {kind!r}; choose from {EXPERIMENT_KINDS}")
    if kind in ("size_classes", "cultivars", "regions"):
        if model is None:
            model = completer_from_config(config)
            model.fit(records)
        fn = {"size_classes": run_size_classes, "cultivars": run_cultivars,
              "regions": run_regions}[kind]
        reports = fn(model, records, **kwargs)
    elif kind == "latent_sweep":
        reports = run_latent_sweep(records, config, **kwargs)
    elif kind == "interpolation":
        decoder = getattr(model, "decoder_", None) if model is not None else None
        reports = run_interpolation(records, config, decoder=decoder, outdir=outdir, **kwargs)
    elif kind == "ablation_additions":
        reports = run_ablation_additions(records, config, **kwargs)
    else:
        reports = run_ablation_general(records, config, **kwargs)
    if outdir is not None:
        Path(outdir).mkdir(parents=True, exist_ok=True)
        write_reports_csv(Path(outdir) / f"{kind}.csv", reports)
    return reports
