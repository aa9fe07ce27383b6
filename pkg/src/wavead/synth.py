"""Synthetic anomaly injectors and a seeded benchmark series generator.

Injectors operate on normalized windows, so amplitudes are in units of the
per-feature standard deviation (1 after z-scoring). Three perturbation
kinds are supported: a periodic oscillation added across features, a step
offset from an onset row onward, and a linear ramp from an onset row to
full amplitude at the final row.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .ingest import TimeSeries, WindowConfig

KINDS = ("cyclic", "sudden_drift", "gradual_drift")


@dataclass(frozen=True)
class AnomalySpec:
    """Parameters of one injected perturbation."""

    kind: str
    target_features: tuple[int, ...]
    amplitude: float
    period: int | None = None  # cyclic only
    onset: int | None = None  # drifts only

    def validate(self, window_length: int) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown anomaly kind: {self.kind!r}")
        if self.amplitude <= 0:
            raise ValueError("amplitude must be positive")
        if not self.target_features:
            raise ValueError("target_features must be non-empty")
        if self.kind == "cyclic":
            if self.period is None or not 2 <= self.period <= window_length:
                raise ValueError("cyclic period must be in [2, window length]")
        else:
            if self.onset is None or not 0 <= self.onset < window_length:
                raise ValueError("drift onset must be in [0, window length)")
            if self.kind == "gradual_drift" and self.onset == window_length - 1:
                raise ValueError("gradual drift needs a ramp of nonzero length")


@dataclass
class LabeledWindow:
    """A window plus its anomaly label; label is 1 iff a spec is attached."""

    window: np.ndarray
    label: int
    spec: AnomalySpec | None = None


def _perturb(window: np.ndarray, spec: AnomalySpec, profile: np.ndarray) -> LabeledWindow:
    out = np.array(window, dtype=float, copy=True)
    for d in spec.target_features:
        out[:, d] += profile
    return LabeledWindow(window=out, label=1, spec=spec)


def inject_cyclic(window: np.ndarray, spec: AnomalySpec) -> LabeledWindow:
    """Add amplitude * sin(2*pi*t/period) to the target features."""
    length = window.shape[0]
    if spec.kind != "cyclic":
        raise ValueError("spec kind must be 'cyclic'")
    spec.validate(length)
    t = np.arange(length)
    return _perturb(window, spec, spec.amplitude * np.sin(2.0 * math.pi * t / spec.period))


def inject_sudden_drift(window: np.ndarray, spec: AnomalySpec) -> LabeledWindow:
    """Add a constant offset to the target features for rows at or past onset."""
    length = window.shape[0]
    if spec.kind != "sudden_drift":
        raise ValueError("spec kind must be 'sudden_drift'")
    spec.validate(length)
    profile = np.where(np.arange(length) >= spec.onset, spec.amplitude, 0.0)
    return _perturb(window, spec, profile)


def inject_gradual_drift(window: np.ndarray, spec: AnomalySpec) -> LabeledWindow:
    """Add a ramp rising from 0 at onset to full amplitude at the last row."""
    length = window.shape[0]
    if spec.kind != "gradual_drift":
        raise ValueError("spec kind must be 'gradual_drift'")
    spec.validate(length)
    t = np.arange(length)
    ramp = np.maximum(0.0, t - spec.onset) / (length - 1 - spec.onset)
    return _perturb(window, spec, spec.amplitude * ramp)


_INJECTORS = {
    "cyclic": inject_cyclic,
    "sudden_drift": inject_sudden_drift,
    "gradual_drift": inject_gradual_drift,
}


def inject(window: np.ndarray, spec: AnomalySpec) -> LabeledWindow:
    """Dispatch to the injector matching ``spec.kind``."""
    if spec.kind not in _INJECTORS:
        raise ValueError(f"unknown anomaly kind: {spec.kind!r}")
    return _INJECTORS[spec.kind](window, spec)


@dataclass
class InjectorDefaults:
    """Amplitudes and shape parameters used when scheduling anomalies."""

    cyclic_amplitude: float = 2.0
    sudden_amplitude: float = 3.0
    gradual_amplitude: float = 3.0
    cyclic_period: int = 5
    sudden_onset: int = 5
    gradual_onset: int = 4


@dataclass
class Benchmark:
    """A generated series plus the scheduled perturbations per window.

    ``schedule`` maps the 1-based start row of each anomalous window to its
    spec; windows absent from the map are normal. Perturbations are applied
    to windows (after normalization), not to the stored series, so the
    ground-truth window labels are exact even though windows overlap.
    """

    series: TimeSeries
    schedule: dict[int, AnomalySpec]
    window: WindowConfig


def make_benchmark(
    seed: int,
    n_steps: int = 2000,
    n_features: int = 5,
    window: WindowConfig | None = None,
    anomaly_fraction: float = 0.1,
    degradation_onset: int | None = None,
    injectors: InjectorDefaults | None = None,
) -> Benchmark:
    """Build a deterministic engine-style benchmark series and schedule.

    The series mixes two slow sinusoidal drivers across features and adds
    Gaussian noise; an optional degradation ramp drifts all features from
    ``degradation_onset`` to the end. A fraction of windows is scheduled
    for injection, cycling through the three anomaly kinds.
    """
    if n_steps < 200 or n_features < 3:
        raise DataError("benchmark needs n_steps >= 200 and n_features >= 3")
    if not 0.0 <= anomaly_fraction <= 1.0:
        raise ValueError("anomaly_fraction must be in [0, 1]")
    window = window or WindowConfig()
    injectors = injectors or InjectorDefaults()

    rng = np.random.default_rng(seed)
    t = np.arange(n_steps, dtype=float)
    driver_periods = (211.0, 83.0)
    drivers = np.stack(
        [np.sin(2.0 * math.pi * t / p + rng.uniform(0.0, 2.0 * math.pi)) for p in driver_periods],
        axis=1,
    )
    mixing = rng.normal(0.0, 1.0, size=(2, n_features))
    offsets = rng.uniform(-2.0, 2.0, size=n_features)
    values = drivers @ mixing + offsets + 0.25 * rng.normal(size=(n_steps, n_features))
    if degradation_onset is not None:
        if not 0 <= degradation_onset < n_steps:
            raise ValueError("degradation_onset out of range")
        ramp = np.clip((t - degradation_onset) / (n_steps - degradation_onset), 0.0, 1.0)
        direction = rng.normal(0.0, 1.0, size=n_features)
        direction /= np.linalg.norm(direction)
        values += np.outer(ramp, direction)

    series = TimeSeries(values, [f"sensor_{d}" for d in range(n_features)])

    n_windows = window.n_windows(n_steps)
    n_anomalous = int(round(anomaly_fraction * n_windows))
    chosen = np.sort(rng.choice(n_windows, size=n_anomalous, replace=False))
    schedule: dict[int, AnomalySpec] = {}
    for rank, n in enumerate(chosen):
        start = 1 + int(n) * window.stride
        kind = KINDS[rank % len(KINDS)]
        if kind == "cyclic":
            spec = AnomalySpec(
                kind=kind,
                target_features=tuple(range(n_features)),
                amplitude=injectors.cyclic_amplitude,
                period=injectors.cyclic_period,
            )
        elif kind == "sudden_drift":
            spec = AnomalySpec(
                kind=kind,
                target_features=(rank % n_features,),
                amplitude=injectors.sudden_amplitude,
                onset=injectors.sudden_onset,
            )
        else:
            spec = AnomalySpec(
                kind=kind,
                target_features=(rank % n_features,),
                amplitude=injectors.gradual_amplitude,
                onset=injectors.gradual_onset,
            )
        spec.validate(window.length)
        schedule[start] = spec
    return Benchmark(series=series, schedule=schedule, window=window)


def apply_schedule(
    windows: np.ndarray, starts: list[int], schedule: dict[int, AnomalySpec]
) -> tuple[np.ndarray, np.ndarray]:
    """Perturb scheduled windows in a batch; returns (windows, labels)."""
    out = np.array(windows, dtype=float, copy=True)
    labels = np.zeros(len(starts), dtype=int)
    for i, start in enumerate(starts):
        spec = schedule.get(start)
        if spec is not None:
            out[i] = inject(windows[i], spec).window
            labels[i] = 1
    return out, labels


def write_labels(schedule: dict[int, AnomalySpec], path: str | Path) -> None:
    """Serialize the schedule as {window_start: {label, kind, ...}}."""
    payload = {}
    for start in sorted(schedule):
        spec = schedule[start]
        entry: dict = {
            "label": 1,
            "kind": spec.kind,
            "target_features": list(spec.target_features),
            "amplitude": spec.amplitude,
        }
        if spec.period is not None:
            entry["period"] = spec.period
        if spec.onset is not None:
            entry["onset"] = spec.onset
        payload[str(start)] = entry
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_labels(path: str | Path) -> dict[int, AnomalySpec]:
    """Parse a labels file back into a schedule."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"labels file is not valid JSON: {exc}") from None
    schedule: dict[int, AnomalySpec] = {}
    for key, entry in payload.items():
        schedule[int(key)] = AnomalySpec(
            kind=entry["kind"],
            target_features=tuple(entry["target_features"]),
            amplitude=float(entry["amplitude"]),
            period=entry.get("period"),
            onset=entry.get("onset"),
        )
    return schedule
