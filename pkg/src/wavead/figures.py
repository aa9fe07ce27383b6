"""Matplotlib rendering of run artifacts to image files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 150


def save_reward_curve(
    episodes: np.ndarray, rewards: np.ndarray, path: str | Path
) -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(episodes, rewards, lw=1.2, color="tab:blue")
    ax.set_xlabel("episode")
    ax.set_ylabel("cumulative reward")
    ax.set_title("Boundary calibration reward per episode")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_latent_scatter(
    latents: np.ndarray,
    labels: np.ndarray,
    synthetic: np.ndarray,
    path: str | Path,
) -> Path:
    """3-d scatter of the first three latent dimensions by class."""
    path = Path(path)
    latents = np.asarray(latents, dtype=float)
    labels = np.asarray(labels, dtype=int)
    synthetic = np.asarray(synthetic, dtype=bool)
    fig = plt.figure(figsize=(7, 6))
    ax = fig.add_subplot(projection="3d")
    groups = [
        (~synthetic & (labels == 0), "tab:blue", ".", "normal"),
        (~synthetic & (labels == 1), "gold", "o", "flagged"),
        (synthetic, "tab:red", "x", "synthetic"),
    ]
    for mask, color, marker, name in groups:
        if mask.any():
            ax.scatter(
                latents[mask, 0],
                latents[mask, 1],
                latents[mask, 2],
                c=color,
                marker=marker,
                s=18,
                label=name,
                alpha=0.8,
            )
    ax.set_xlabel("z1")
    ax.set_ylabel("z2")
    ax.set_zlabel("z3")
    ax.set_title("Latent space by class")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_error_histogram(
    errors: np.ndarray,
    truths: np.ndarray,
    theta: float,
    path: str | Path,
    bins: int = 40,
) -> Path:
    path = Path(path)
    errors = np.asarray(errors, dtype=float)
    truths = np.asarray(truths, dtype=int)
    fig, ax = plt.subplots(figsize=(7, 4))
    edges = np.histogram_bin_edges(errors, bins=bins)
    ax.hist(errors[truths == 0], bins=edges, alpha=0.7, label="normal", color="tab:blue")
    if (truths == 1).any():
        ax.hist(
            errors[truths == 1], bins=edges, alpha=0.7, label="anomalous", color="tab:red"
        )
    ax.axvline(theta, color="black", ls="--", lw=1.2, label=f"boundary {theta:.3g}")
    ax.set_xlabel("normalized reconstruction error")
    ax.set_ylabel("windows")
    ax.set_yscale("log")
    ax.set_title("Reconstruction errors and decision boundary")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path
