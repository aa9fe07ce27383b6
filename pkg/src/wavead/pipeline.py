"""Batch pipeline stages shared by the command-line interface.

Stage layout inside an output directory:

- ``generate``  -> series.csv, labels.json
- ``train``     -> checkpoint.json, norm_stats.json, training_log.jsonl
- ``calibrate`` -> boundary.json, calibration.jsonl
- ``evaluate``  -> report.json, curves/*.csv, figures/*.png
- ``detect``    -> predictions.csv

Every stage is a deterministic function of the configuration (all
randomness flows from the three named seeds), so rerunning a stage
reproduces its outputs byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import evaluate as ev
from . import figures
from .autoencoder import (
    ConvAutoencoder,
    load_checkpoint,
    mc_uncertainty,
    nearest_rank,
    save_checkpoint,
    train_epoch,
)
from .config import RunConfig
from .errors import DataError
from .ingest import (
    NormStats,
    TimeSeries,
    apply_normalize,
    fit_normalize,
    load_csv,
    sliding_windows,
    write_csv,
)
from .nn import Adam
from .qlearning import (
    CalibrationResult,
    calibrate,
    read_calibration_log,
    write_calibration_log,
)
from .synth import AnomalySpec, apply_schedule, make_benchmark, read_labels, write_labels
from .wavelet import get_filter_bank, image_batch


@dataclass
class PreparedData:
    """Normalized, windowed, and injected inputs shared by the stages."""

    series: TimeSeries
    stats: NormStats
    starts: np.ndarray  # 1-based window starts
    windows: np.ndarray  # (N, L, D), scheduled anomalies applied
    synthetic: np.ndarray  # bool, injector ground truth per window
    images: np.ndarray  # (N, R, D)
    train_mask: np.ndarray
    test_mask: np.ndarray
    train_rows: int


def _series_path(config: RunConfig, out_dir: Path) -> Path:
    return Path(config.paths.input) if config.paths.input else out_dir / "series.csv"


def _labels_path(config: RunConfig, out_dir: Path) -> Path | None:
    if config.paths.labels:
        return Path(config.paths.labels)
    default = out_dir / "labels.json"
    return default if default.is_file() or not config.paths.input else None


def stage_generate(config: RunConfig, out_dir: Path) -> dict[str, Path]:
    """Write the seeded benchmark series and its anomaly schedule."""
    out_dir.mkdir(parents=True, exist_ok=True)
    bench = make_benchmark(
        seed=config.seeds.data,
        n_steps=config.benchmark.length,
        n_features=config.benchmark.features,
        window=config.window,
        anomaly_fraction=config.synth.fraction,
        degradation_onset=config.benchmark.degradation_onset,
        injectors=config.synth.injector_defaults(),
    )
    series_path = out_dir / "series.csv"
    labels_path = out_dir / "labels.json"
    write_csv(bench.series, series_path)
    write_labels(bench.schedule, labels_path)
    return {"series": series_path, "labels": labels_path}


def prepare_data(config: RunConfig, out_dir: Path) -> PreparedData:
    """Load, split, normalize, window, and inject. Deterministic."""
    series = load_csv(_series_path(config, out_dir))
    labels_path = _labels_path(config, out_dir)
    schedule: dict[int, AnomalySpec] = {}
    if labels_path is not None and labels_path.is_file():
        schedule = read_labels(labels_path)

    train_rows = int(config.train_fraction * series.n_steps)
    if train_rows < config.window.length:
        raise DataError("training split shorter than one window")
    train_slice = TimeSeries(
        series.values[:train_rows], list(series.feature_names), series.t0
    )
    _, stats = fit_normalize(train_slice)
    normalized = apply_normalize(series, stats)

    batch = sliding_windows(normalized, config.window)
    starts = np.array(batch.start_indices, dtype=int)
    windows, labels = apply_schedule(batch.windows, batch.start_indices, schedule)
    synthetic = labels.astype(bool)

    bank = get_filter_bank(config.wavelet.family)
    images = image_batch(windows, bank, config.wavelet.levels)

    ends = starts + config.window.length - 1
    train_mask = ends <= train_rows
    test_mask = starts > train_rows
    return PreparedData(
        series=series,
        stats=stats,
        starts=starts,
        windows=windows,
        synthetic=synthetic,
        images=images,
        train_mask=train_mask,
        test_mask=test_mask,
        train_rows=train_rows,
    )


def _write_norm_stats(data: PreparedData, config: RunConfig, path: Path) -> None:
    payload = {
        "mean": [float(v) for v in data.stats.mean],
        "std": [float(v) for v in data.stats.std],
        "train_rows": data.train_rows,
        "feature_names": list(data.series.feature_names),
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _read_norm_stats(path: Path) -> NormStats:
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    payload = json.loads(path.read_text())
    return NormStats(
        mean=np.array(payload["mean"], dtype=float),
        std=np.array(payload["std"], dtype=float),
    )


def stage_train(config: RunConfig, out_dir: Path) -> dict[str, Path]:
    """Fit the autoencoder on the training windows and checkpoint it."""
    out_dir.mkdir(parents=True, exist_ok=True)
    data = prepare_data(config, out_dir)
    train_images = data.images[data.train_mask]
    train_labels = data.synthetic[data.train_mask].astype(int)

    model = ConvAutoencoder(
        image_shape=data.images.shape[1:],
        filters=config.network.filters,
        latent_dim=config.network.latent_dim,
        dropout_rate=config.network.dropout,
        latent_scale=config.network.latent_scale,
        seed=config.seeds.train,
    )
    optimizer = Adam(learning_rate=config.network.learning_rate)
    rng = np.random.default_rng([config.seeds.train, 1])

    log_path = out_dir / "training_log.jsonl"
    with log_path.open("w", encoding="utf-8") as log:
        for epoch in range(config.network.epochs):
            parts = train_epoch(
                model,
                train_images,
                train_labels,
                optimizer,
                config.network.sep_weight,
                rng,
                batch_size=config.network.batch_size,
                sep_cap=config.network.sep_cap,
            )
            log.write(
                json.dumps(
                    {
                        "epoch": epoch,
                        "recon": float(np.mean(parts["recon"])),
                        "sep": float(np.mean(parts["sep"])),
                    },
                    sort_keys=True,
                )
                + "\n"
            )

    checkpoint_path = out_dir / "checkpoint.json"
    save_checkpoint(model, checkpoint_path)
    stats_path = out_dir / "norm_stats.json"
    _write_norm_stats(data, config, stats_path)
    return {"checkpoint": checkpoint_path, "training_log": log_path, "norm_stats": stats_path}


def extract_features(
    model: ConvAutoencoder,
    images: np.ndarray,
    starts: np.ndarray,
    mc_samples: int,
    train_seed: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Raw errors, dropout uncertainties, and latents for each window.

    The Monte-Carlo stream of a window is seeded by (train seed, window
    start), so scores do not depend on batch composition.
    """
    errors = model.recon_errors(images)
    latents = model.encode(images)
    uncertainties = np.array(
        [
            mc_uncertainty(model, images[i], mc_samples, seed=[train_seed, 101, int(start)]).value
            for i, start in enumerate(starts)
        ]
    )
    return errors, uncertainties, latents


def stage_calibrate(config: RunConfig, out_dir: Path) -> dict[str, Path]:
    """Calibrate the decision boundary on the training windows."""
    data = prepare_data(config, out_dir)
    model = load_checkpoint(out_dir / "checkpoint.json")

    tr = data.train_mask
    errors_raw, uncertainties, latents = extract_features(
        model, data.images[tr], data.starts[tr], config.mc_samples, config.seeds.train
    )
    synthetic = data.synthetic[tr]
    if not synthetic.any():
        raise DataError("calibration requires scheduled synthetic anomalies")

    normal_errors = errors_raw[~synthetic]
    error_scale = ev.baseline_threshold(normal_errors)
    errors = errors_raw / error_scale
    u_threshold = nearest_rank(uncertainties, 0.75)

    # synthetic windows are anomalous by construction; high-uncertainty
    # windows are treated as anomalous as well
    cal_labels = (synthetic | (uncertainties > u_threshold)).astype(int)

    theta_max = 2.0 * nearest_rank(errors, 0.999)
    result = calibrate(
        errors,
        uncertainties,
        latents,
        cal_labels,
        config.rl,
        rng_seed=config.seeds.rl,
        theta_max=theta_max,
    )

    log_path = out_dir / "calibration.jsonl"
    write_calibration_log(result, log_path)
    boundary_path = out_dir / "boundary.json"
    boundary_path.write_text(
        json.dumps(
            {
                "theta": result.theta,
                "theta0": result.theta0,
                "theta_max": result.theta_max,
                "error_scale": float(error_scale),
                "uncertainty_threshold": float(u_threshold),
                "action_mode": result.action_mode,
                "separation": result.separation,
                "error_bin_edges": [float(v) for v in result.bins.error_edges],
                "q_table": [[float(v) for v in row] for row in result.q_table],
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    return {"boundary": boundary_path, "calibration_log": log_path}


def _load_boundary(out_dir: Path) -> dict:
    path = out_dir / "boundary.json"
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    return json.loads(path.read_text())


def stage_evaluate(config: RunConfig, out_dir: Path) -> dict[str, Path]:
    """Score the held-out windows, write the report, curves, and figures."""
    data = prepare_data(config, out_dir)
    model = load_checkpoint(out_dir / "checkpoint.json")
    boundary = _load_boundary(out_dir)
    theta = float(boundary["theta"])
    error_scale = float(boundary["error_scale"])
    u_threshold = float(boundary["uncertainty_threshold"])

    te = data.test_mask
    errors_raw, uncertainties, latents = extract_features(
        model, data.images[te], data.starts[te], config.mc_samples, config.seeds.train
    )
    errors = errors_raw / error_scale
    truths = data.synthetic[te].astype(int)
    predictions = np.array([int(e > theta) for e in errors])
    baseline_predictions = ev.baseline_static(errors, 1.0)  # error_scale is the 95th pct

    calibrated = ev.compute_metrics(predictions, truths)
    baseline = ev.compute_metrics(baseline_predictions, truths)

    proxy = ev.proxy_labels(
        data.synthetic[te], errors, uncertainties, 1.0, u_threshold
    )

    curves_dir = out_dir / "curves"
    curves_dir.mkdir(parents=True, exist_ok=True)
    log_records = read_calibration_log(out_dir / "calibration.jsonl")
    ev.export_reward_curve(log_records, curves_dir / "reward_curve.csv")
    ev.export_latents(
        data.starts[te], latents, truths, data.synthetic[te], curves_dir / "latent.csv"
    )
    ev.export_error_histogram(errors, theta, curves_dir / "error_histogram.csv")
    ev.export_window_table(
        data.starts[te],
        errors,
        uncertainties,
        predictions,
        truths,
        data.synthetic[te],
        curves_dir / "windows.csv",
    )

    figures_dir = out_dir / "figures"
    figures_dir.mkdir(parents=True, exist_ok=True)
    episodes = np.array([rec["episode"] for rec in log_records])
    rewards = np.array([rec["cumulative_reward"] for rec in log_records])
    figures.save_reward_curve(episodes, rewards, figures_dir / "reward_curve.png")
    figures.save_latent_scatter(
        latents, proxy == 1, data.synthetic[te], figures_dir / "latent_scatter.png"
    )
    figures.save_error_histogram(
        errors, truths, theta, figures_dir / "error_histogram.png"
    )

    report = {
        "config": config.to_dict(),
        "split": {
            "evaluation_split": "held_out",
            "train_rows": data.train_rows,
            "train_windows": int(data.train_mask.sum()),
            "test_windows": int(data.test_mask.sum()),
            "straddling_windows": int(
                (~data.train_mask & ~data.test_mask).sum()
            ),
        },
        "boundary": {
            "theta": theta,
            "theta_max": float(boundary["theta_max"]),
            "error_scale": error_scale,
            "uncertainty_threshold": u_threshold,
            "action_mode": boundary["action_mode"],
        },
        "metrics": {"calibrated": calibrated, "baseline": baseline},
        "ground_truth": {
            "source": "injector",
            "anomalous_windows": int(truths.sum()),
            "normal_windows": int((truths == 0).sum()),
        },
        "proxy_labeling": {
            "anomalous": int((proxy == 1).sum()),
            "normal": int((proxy == 0).sum()),
            "indeterminate": int((proxy == ev.INDETERMINATE).sum()),
        },
    }
    report_path = ev.write_report(report, out_dir / "report.json")
    return {"report": report_path, "curves": curves_dir, "figures": figures_dir}


def stage_detect(
    config: RunConfig, out_dir: Path, input_path: str | Path | None = None
) -> dict[str, Path]:
    """Apply a trained checkpoint and boundary to a series; no labels needed."""
    model = load_checkpoint(out_dir / "checkpoint.json")
    boundary = _load_boundary(out_dir)
    stats = _read_norm_stats(out_dir / "norm_stats.json")
    series = load_csv(input_path or _series_path(config, out_dir))
    normalized = apply_normalize(series, stats)
    batch = sliding_windows(normalized, config.window)
    bank = get_filter_bank(config.wavelet.family)
    images = image_batch(batch.windows, bank, config.wavelet.levels)
    predictions, errors = ev.detect(
        model, images, float(boundary["theta"]), float(boundary["error_scale"])
    )
    path = out_dir / "predictions.csv"
    with path.open("w", encoding="utf-8") as fh:
        fh.write("start,error,prediction\n")
        for start, err, pred in zip(batch.start_indices, errors, predictions):
            fh.write(f"{start},{repr(float(err))},{int(pred)}\n")
    return {"predictions": path}


def stage_run(config: RunConfig, out_dir: Path) -> dict[str, Path]:
    """Chain generate, train, calibrate, and evaluate in one call."""
    artifacts: dict[str, Path] = {}
    if not config.paths.input:
        artifacts.update(stage_generate(config, out_dir))
    artifacts.update(stage_train(config, out_dir))
    artifacts.update(stage_calibrate(config, out_dir))
    artifacts.update(stage_evaluate(config, out_dir))
    return artifacts
