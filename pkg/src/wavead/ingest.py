"""Loading, normalization, and windowing of multivariate sensor series.

Row indices reported to callers (window starts, record keys) are 1-based;
array indexing inside this package is 0-based.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError


@dataclass
class TimeSeries:
    """A T x D block of sensor readings; rows are consecutive time steps."""

    values: np.ndarray
    feature_names: list[str]
    t0: int = 1  # 1-based index of the first row in the source series

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise DataError(f"expected a 2-d series, got shape {self.values.shape}")
        if self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise DataError("series needs at least one row and one column")
        if len(self.feature_names) != self.values.shape[1]:
            raise DataError(
                f"{len(self.feature_names)} feature names for "
                f"{self.values.shape[1]} columns"
            )
        if not np.isfinite(self.values).all():
            raise DataError("series contains non-finite values")

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


@dataclass
class NormStats:
    """Per-feature mean and population standard deviation.

    ``std`` is exactly 0 for constant columns; normalization treats those
    columns as if std were 1, so they map to all zeros.
    """

    mean: np.ndarray
    std: np.ndarray

    def safe_std(self) -> np.ndarray:
        return np.where(self.std == 0.0, 1.0, self.std)


@dataclass(frozen=True)
class WindowConfig:
    """Sliding-window length and stride, in time steps."""

    length: int = 10
    stride: int = 2

    def __post_init__(self):
        if self.length < 2:
            raise ValueError("window length must be at least 2")
        if self.stride < 1:
            raise ValueError("window stride must be at least 1")

    def n_windows(self, n_steps: int) -> int:
        if n_steps < self.length:
            return 0
        return (n_steps - self.length) // self.stride + 1


@dataclass
class SubsequenceBatch:
    """Overlapping windows cut from one series.

    ``start_indices`` holds the 1-based source row of each window's first
    sample, so window n covers source rows [start, start + L - 1].
    """

    windows: np.ndarray  # (N, L, D)
    start_indices: list[int]

    def __len__(self) -> int:
        return self.windows.shape[0]


def load_csv(path: str | Path) -> TimeSeries:
    """Parse a UTF-8 CSV with a header of feature names and numeric rows."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("no data rows") from None
        names = [h.strip() for h in header]
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names):
                raise DataError(
                    f"line {lineno}: expected {len(names)} fields, got {len(row)}"
                )
            parsed = []
            for name, cell in zip(names, row):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"line {lineno}, column '{name}': cannot parse {cell!r}"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise DataError("no data rows")
    return TimeSeries(np.array(rows, dtype=float), names)


def write_csv(series: TimeSeries, path: str | Path) -> None:
    """Write a series in the same format ``load_csv`` reads."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(series.feature_names)
        for row in series.values:
            writer.writerow([repr(float(v)) for v in row])


def fit_normalize(series: TimeSeries) -> tuple[TimeSeries, NormStats]:
    """Z-score each feature; constant columns map to exact zeros."""
    values = series.values
    mean = values.mean(axis=0)
    std = values.std(axis=0)  # population standard deviation
    constant = np.all(values == values[0:1, :], axis=0)
    std = np.where(constant, 0.0, std)
    stats = NormStats(mean=mean, std=std)
    normalized = apply_normalize(series, stats)
    return normalized, stats


def apply_normalize(series: TimeSeries, stats: NormStats) -> TimeSeries:
    """Apply previously fitted statistics to a series."""
    out = (series.values - stats.mean) / stats.safe_std()
    out[:, stats.std == 0.0] = 0.0
    return TimeSeries(out, list(series.feature_names), series.t0)


def denormalize(series: TimeSeries, stats: NormStats) -> TimeSeries:
    """Invert ``apply_normalize``; constant columns recover their mean."""
    out = series.values * stats.safe_std() + stats.mean
    return TimeSeries(out, list(series.feature_names), series.t0)


def sliding_windows(series: TimeSeries, cfg: WindowConfig) -> SubsequenceBatch:
    """Cut overlapping windows; trailing samples short of a window are dropped."""
    n_steps = series.n_steps
    if n_steps < cfg.length:
        raise DataError("series shorter than window")
    count = cfg.n_windows(n_steps)
    windows = np.stack(
        [series.values[n * cfg.stride : n * cfg.stride + cfg.length] for n in range(count)]
    )
    starts = [series.t0 + n * cfg.stride for n in range(count)]
    return SubsequenceBatch(windows=windows, start_indices=starts)
