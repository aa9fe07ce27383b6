"""Detection over window batches, labeling helpers, and the metric suite."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autoencoder import ConvAutoencoder, nearest_rank
from .qlearning import predict_label

INDETERMINATE = -1


def detect(
    model: ConvAutoencoder,
    images: np.ndarray,
    theta: float,
    error_scale: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Label each window by thresholding its normalized reconstruction error.

    Returns (predictions, normalized errors). ``error_scale`` is the
    training-derived normalizer for raw errors; theta lives in the same
    normalized units.
    """
    if error_scale <= 0:
        raise ValueError("error_scale must be positive")
    errors = np.asarray(model.recon_errors(images), dtype=float) / error_scale
    predictions = np.array([predict_label(e, theta) for e in errors], dtype=int)
    return predictions, errors


def baseline_threshold(normal_training_errors: np.ndarray) -> float:
    """Static boundary: the 95th percentile of normal training errors."""
    return nearest_rank(np.asarray(normal_training_errors, dtype=float), 0.95)


def baseline_static(errors: np.ndarray, threshold: float) -> np.ndarray:
    """Fixed-threshold predictions from precomputed errors."""
    return (np.asarray(errors, dtype=float) > threshold).astype(int)


def proxy_labels(
    synthetic: np.ndarray,
    errors: np.ndarray,
    uncertainties: np.ndarray,
    error_threshold: float,
    uncertainty_threshold: float,
) -> np.ndarray:
    """Heuristic ground-truth approximation for unlabeled data.

    A window is anomalous if it is synthetic or its error or uncertainty is
    strictly above its threshold, and normal if both scores are strictly
    below. Windows sitting exactly on a threshold satisfy neither clause
    and are marked INDETERMINATE (-1) so metrics can exclude them.
    """
    synthetic = np.asarray(synthetic, dtype=bool)
    errors = np.asarray(errors, dtype=float)
    uncertainties = np.asarray(uncertainties, dtype=float)
    labels = np.full(synthetic.shape, INDETERMINATE, dtype=int)
    anomalous = synthetic | (errors > error_threshold) | (uncertainties > uncertainty_threshold)
    normal = ~synthetic & (errors < error_threshold) & (uncertainties < uncertainty_threshold)
    labels[anomalous] = 1
    labels[normal & ~anomalous] = 0
    return labels


def confusion_counts(predictions: np.ndarray, truths: np.ndarray) -> dict[str, int]:
    predictions = np.asarray(predictions, dtype=int)
    truths = np.asarray(truths, dtype=int)
    return {
        "tp": int(((predictions == 1) & (truths == 1)).sum()),
        "fp": int(((predictions == 1) & (truths == 0)).sum()),
        "fn": int(((predictions == 0) & (truths == 1)).sum()),
        "tn": int(((predictions == 0) & (truths == 0)).sum()),
    }


def metrics_from_counts(counts: dict[str, int]) -> dict[str, float]:
    tp, fp, fn, tn = counts["tp"], counts["fp"], counts["fn"], counts["tn"]
    total = tp + fp + fn + tn
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return {
        "precision": float(precision),
        "recall": float(recall),
        "accuracy": float((tp + tn) / total) if total else 0.0,
        "f1": float(f1),
    }


def compute_metrics(predictions: np.ndarray, truths: np.ndarray) -> dict:
    """Precision/recall/accuracy/F1 plus the confusion counts behind them."""
    predictions = np.asarray(predictions, dtype=int)
    truths = np.asarray(truths, dtype=int)
    if predictions.shape != truths.shape:
        raise ValueError("prediction/label length mismatch")
    if truths.size == 0 or truths.min() == truths.max():
        raise ValueError("metrics undefined for single-class ground truth")
    counts = confusion_counts(predictions, truths)
    return {"counts": counts, **metrics_from_counts(counts)}


# -- delimited exports ------------------------------------------------------


def _write_csv(path: Path, header: list[str], rows: np.ndarray) -> None:
    with path.open("w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in np.atleast_2d(rows):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def export_reward_curve(log_records: list[dict], path: str | Path) -> Path:
    """Episode-indexed reward curve, one row per episode."""
    path = Path(path)
    rows = np.array(
        [
            [rec["episode"], rec["cumulative_reward"], rec["epsilon"], rec["theta"]]
            for rec in log_records
        ]
    )
    _write_csv(path, ["episode", "cumulative_reward", "epsilon", "theta"], rows)
    return path


def export_latents(
    starts: np.ndarray,
    latents: np.ndarray,
    labels: np.ndarray,
    synthetic: np.ndarray,
    path: str | Path,
) -> Path:
    """Per-window latent coordinates with labels; synthetic is a 0/1 flag."""
    path = Path(path)
    latents = np.asarray(latents, dtype=float)
    dims = latents.shape[1]
    header = ["start"] + [f"z{i + 1}" for i in range(dims)] + ["label", "synthetic"]
    rows = np.column_stack(
        [
            np.asarray(starts, dtype=float),
            latents,
            np.asarray(labels, dtype=float),
            np.asarray(synthetic, dtype=float),
        ]
    )
    _write_csv(path, header, rows)
    return path


def export_error_histogram(
    errors: np.ndarray, theta: float, path: str | Path, bins: int = 40
) -> Path:
    """Histogram of normalized errors with the boundary in every row."""
    path = Path(path)
    errors = np.asarray(errors, dtype=float)
    counts, edges = np.histogram(errors, bins=bins)
    rows = np.column_stack(
        [edges[:-1], edges[1:], counts.astype(float), np.full(bins, float(theta))]
    )
    _write_csv(path, ["bin_left", "bin_right", "count", "boundary"], rows)
    return path


def export_window_table(
    starts: np.ndarray,
    errors: np.ndarray,
    uncertainties: np.ndarray,
    predictions: np.ndarray,
    truths: np.ndarray,
    synthetic: np.ndarray,
    path: str | Path,
) -> Path:
    """One row per evaluated window: scores, prediction, and ground truth."""
    path = Path(path)
    rows = np.column_stack(
        [
            np.asarray(starts, dtype=float),
            np.asarray(errors, dtype=float),
            np.asarray(uncertainties, dtype=float),
            np.asarray(predictions, dtype=float),
            np.asarray(truths, dtype=float),
            np.asarray(synthetic, dtype=float),
        ]
    )
    _write_csv(
        path,
        ["start", "error", "uncertainty", "predicted", "label", "synthetic"],
        rows,
    )
    return path


def write_report(report: dict, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return path
