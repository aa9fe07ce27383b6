"""Discrete wavelet decomposition and per-window coefficient images.

Each feature column of a window is decomposed into approximation (low
frequency) and detail (high frequency) bands. Bands are stacked coarse to
fine, zero-padded to a common height, and placed side by side per feature,
giving a 2-d image whose rows index frequency components and whose columns
index features.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class FilterBank:
    """Quadrature low-pass/high-pass analysis pair."""

    name: str
    lowpass: tuple[float, ...]
    highpass: tuple[float, ...]

    def __post_init__(self):
        h, g = np.asarray(self.lowpass), np.asarray(self.highpass)
        if h.shape != g.shape or h.size % 2 != 0 or h.size < 2:
            raise ValueError("filters must share an even length of at least 2")
        if (
            abs(h @ h - 1.0) > 1e-12
            or abs(g @ g - 1.0) > 1e-12
            or abs(h @ g) > 1e-12
        ):
            raise ValueError("filter pair is not orthonormal")

    @property
    def n_taps(self) -> int:
        return len(self.lowpass)


DB1 = FilterBank("db1", (1.0 / _SQRT2, 1.0 / _SQRT2), (1.0 / _SQRT2, -1.0 / _SQRT2))

_REGISTRY = {"db1": DB1}


def get_filter_bank(name: str) -> FilterBank:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown wavelet family: {name!r}") from None


def max_levels(length: int) -> int:
    """Deepest decomposition allowed for a signal of the given length."""
    if length < 2:
        return 0
    return int(math.floor(math.log2(length)))


def _extend(x: np.ndarray, n_taps: int) -> np.ndarray:
    # Evenize by repeating the last sample, then reflect enough extra
    # samples for filters longer than two taps.
    if x.size % 2:
        x = np.concatenate([x, x[-1:]])
    extra = n_taps - 2
    if extra > 0:
        x = np.concatenate([x, x[::-1][:extra]])
    return x


def dwt_step(signal: np.ndarray, bank: FilterBank = DB1) -> tuple[np.ndarray, np.ndarray]:
    """One analysis step: stride-2 correlation with the low/high-pass taps.

    Output length is ceil(M/2); odd-length inputs are extended symmetrically
    (final sample repeated) before filtering.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise ValueError("dwt_step expects a 1-d signal")
    if x.size < 2:
        raise ValueError("signal too short for decomposition")
    n_out = (x.size + 1) // 2
    ext = _extend(x, bank.n_taps)
    frames = sliding_window_view(ext, bank.n_taps)[::2][:n_out]
    approx = frames @ np.asarray(bank.lowpass)
    detail = frames @ np.asarray(bank.highpass)
    return approx, detail


def inverse_dwt_step(
    approx: np.ndarray, detail: np.ndarray, bank: FilterBank = DB1
) -> np.ndarray:
    """Synthesis step inverting ``dwt_step`` for even-length inputs."""
    a = np.asarray(approx, dtype=float)
    d = np.asarray(detail, dtype=float)
    if a.shape != d.shape or a.ndim != 1:
        raise ValueError("approximation/detail length mismatch")
    h = np.asarray(bank.lowpass)
    g = np.asarray(bank.highpass)
    n = a.size
    out = np.zeros(2 * n + bank.n_taps - 2)
    for i in range(n):
        out[2 * i : 2 * i + bank.n_taps] += a[i] * h + d[i] * g
    return out[: 2 * n]


def multilevel_dwt(
    signal: np.ndarray, bank: FilterBank, levels: int
) -> list[tuple[str, np.ndarray]]:
    """Decompose into bands ordered coarse to fine: A_J, D_J, ..., D_1."""
    x = np.asarray(signal, dtype=float)
    if levels < 1:
        raise ValueError("levels must be positive")
    allowed = max_levels(x.size)
    if levels > allowed:
        raise ValueError(
            f"{levels} levels exceed the maximum of {allowed} for length {x.size}"
        )
    details: list[np.ndarray] = []
    approx = x
    for _ in range(levels):
        approx, detail = dwt_step(approx, bank)
        details.append(detail)
    bands = [(f"A{levels}", approx)]
    for j in range(levels, 0, -1):
        bands.append((f"D{j}", details[j - 1]))
    return bands


@dataclass
class CoefficientImage:
    """Stacked wavelet bands, one feature per column.

    ``row_labels[r]`` names the band and in-band position of row r, e.g.
    "D2[1]". Columns shorter than the tallest are zero-padded at the tail.
    """

    pixels: np.ndarray  # (R, D)
    row_labels: list[str]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape


def coefficient_image(
    window: np.ndarray, bank: FilterBank = DB1, levels: int = 3
) -> CoefficientImage:
    """Build the per-window feature image from column-wise decompositions."""
    window = np.asarray(window, dtype=float)
    if window.ndim != 2:
        raise ValueError("window must be 2-d (time x features)")
    columns = []
    labels: list[str] = []
    for d in range(window.shape[1]):
        bands = multilevel_dwt(window[:, d], bank, levels)
        columns.append(np.concatenate([coeffs for _, coeffs in bands]))
        if d == 0:
            for name, coeffs in bands:
                labels.extend(f"{name}[{i}]" for i in range(coeffs.size))
    height = max(col.size for col in columns)
    pixels = np.zeros((height, window.shape[1]))
    for d, col in enumerate(columns):
        pixels[: col.size, d] = col
    labels += [f"pad[{i}]" for i in range(height - len(labels))]
    return CoefficientImage(pixels=pixels, row_labels=labels)


def image_batch(
    windows: np.ndarray, bank: FilterBank = DB1, levels: int = 3
) -> np.ndarray:
    """Coefficient images for a stack of windows, shape (N, R, D)."""
    return np.stack([coefficient_image(w, bank, levels).pixels for w in windows])


def export_image_csv(
    image: CoefficientImage,
    csv_path: str | Path,
    labels_path: str | Path,
    feature_names: list[str] | None = None,
) -> None:
    """Debug export: pixels as CSV plus the row labels as a JSON side file."""
    csv_path = Path(csv_path)
    n_features = image.pixels.shape[1]
    names = feature_names or [f"f{d}" for d in range(n_features)]
    with csv_path.open("w", encoding="utf-8") as fh:
        fh.write(",".join(names) + "\n")
        for row in image.pixels:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    Path(labels_path).write_text(json.dumps(image.row_labels, indent=2) + "\n")
