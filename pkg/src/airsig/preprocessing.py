"""Preprocessing primitives for raw inertial sensor traces.

Standardizes recordings across heterogeneous devices: resampling to a
common rate, per-axis z-score normalization, moving-average smoothing,
and energy-based movement activity detection to isolate the gesture
segment.  All operations are pure; traces are immutable after
construction.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

from .errors import (
    InsufficientData,
    InvalidLength,
    InvalidWindow,
    MalformedTrace,
    MissingSensor,
)

if TYPE_CHECKING:
    from .dataset import SignatureSample


class SensorKind(str, Enum):
    ACCELEROMETER = "accelerometer"
    LINEAR_ACCELEROMETER = "linear_accelerometer"
    GYROSCOPE = "gyroscope"

    @classmethod
    def from_alias(cls, name: str) -> "SensorKind":
        """Resolve short CLI aliases (acc, linacc, gyro) or full names."""
        key = name.strip().lower()
        aliases = {
            "acc": cls.ACCELEROMETER,
            "accelerometer": cls.ACCELEROMETER,
            "linacc": cls.LINEAR_ACCELEROMETER,
            "linear_accelerometer": cls.LINEAR_ACCELEROMETER,
            "gyro": cls.GYROSCOPE,
            "gyroscope": cls.GYROSCOPE,
        }
        if key not in aliases:
            raise ValueError(f"unknown sensor name: {name!r}")
        return aliases[key]


@dataclass(frozen=True)
class SensorTrace:
    """Timestamped 3-axis time series from one sensor.

    timestamps: seconds, strictly increasing, shape (N,)
    samples:    shape (N, 3); m/s^2 for accelerometers, rad/s for gyroscope
    """

    sensor_kind: SensorKind
    timestamps: np.ndarray
    samples: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=np.float64)
        x = np.asarray(self.samples, dtype=np.float64)
        if t.ndim != 1:
            raise MalformedTrace("timestamps must be 1-D")
        if x.ndim != 2 or x.shape[1] != 3:
            raise MalformedTrace(f"samples must have shape (N, 3), got {x.shape}")
        if len(t) != len(x):
            raise MalformedTrace(
                f"length mismatch: {len(t)} timestamps vs {len(x)} sample rows"
            )
        if len(t) == 0:
            raise MalformedTrace("trace is empty")
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(x)):
            raise MalformedTrace("trace contains non-finite values")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise MalformedTrace("timestamps must be strictly increasing")
        t = t.copy()
        x = x.copy()
        t.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "samples", x)

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def duration(self) -> float:
        return float(self.timestamps[-1] - self.timestamps[0])

    @property
    def rate_hz(self) -> float:
        """Mean sampling rate estimated from the timestamps."""
        if len(self) < 2:
            raise InsufficientData("rate undefined for a single-sample trace")
        return (len(self) - 1) / self.duration

    def with_data(self, timestamps: np.ndarray, samples: np.ndarray) -> "SensorTrace":
        return SensorTrace(self.sensor_kind, timestamps, samples)


@dataclass(frozen=True)
class SegmentBounds:
    """Half-open sample index range [start_index, end_index)."""

    start_index: int
    end_index: int

    def __post_init__(self):
        if not 0 <= self.start_index < self.end_index:
            raise ValueError(
                f"invalid bounds [{self.start_index}, {self.end_index})"
            )

    def __len__(self) -> int:
        return self.end_index - self.start_index


@dataclass
class PreprocessConfig:
    """Parameters of the preprocessing pipeline (resample -> crop -> normalize -> smooth)."""

    target_hz: float = 100.0
    tau: float = 0.225
    win_s: float = 0.20
    hop_s: float = 0.10
    smooth_window: int = 5
    pad_length: int = 1000


def resample(trace: SensorTrace, target_hz: float = 100.0) -> SensorTrace:
    """Resample a trace onto a uniform grid at `target_hz`.

    The output grid spans [t_first, t_last]; values are linearly
    interpolated per axis.  Exact on piecewise-linear signals.
    """
    if len(trace) < 2:
        raise InsufficientData("resampling needs at least 2 samples")
    if target_hz <= 0:
        raise ValueError("target_hz must be positive")
    t0, t1 = trace.timestamps[0], trace.timestamps[-1]
    n_out = int(np.floor((t1 - t0) * target_hz)) + 1
    grid = t0 + np.arange(n_out) / target_hz
    out = np.empty((n_out, 3))
    for axis in range(3):
        out[:, axis] = np.interp(grid, trace.timestamps, trace.samples[:, axis])
    return trace.with_data(grid, out)


def zscore_normalize(trace: SensorTrace) -> SensorTrace:
    """Normalize each axis to mean 0 and population std 1.

    Axes with std below 1e-12 (flat recordings) map to all-zeros.
    """
    if len(trace) < 2:
        raise InsufficientData("z-score needs at least 2 samples")
    x = trace.samples
    mean = x.mean(axis=0)
    std = x.std(axis=0)  # population std (N divisor)
    out = np.zeros_like(x)
    ok = std >= 1e-12
    out[:, ok] = (x[:, ok] - mean[ok]) / std[ok]
    return trace.with_data(trace.timestamps, out)


def moving_average(trace: SensorTrace, window: int = 5) -> SensorTrace:
    """Centered moving average per axis.

    At the boundaries the window is clipped to the available samples
    (no zero padding), so constants are preserved exactly and the
    output length equals the input length.
    """
    if window < 1 or window % 2 == 0:
        raise InvalidWindow(f"window must be odd and >= 1, got {window}")
    if window > len(trace):
        raise InvalidWindow(
            f"window {window} longer than trace of {len(trace)} samples"
        )
    if window == 1:
        return trace
    n = len(trace)
    kernel = np.ones(window)
    counts = np.convolve(np.ones(n), kernel, mode="same")
    out = np.empty_like(trace.samples)
    for axis in range(3):
        out[:, axis] = np.convolve(trace.samples[:, axis], kernel, mode="same") / counts
    return trace.with_data(trace.timestamps, out)


def detect_movement(
    linear_accel: SensorTrace,
    tau: float = 0.225,
    win_s: float = 0.20,
    hop_s: float = 0.10,
) -> SegmentBounds:
    """Locate the gesture segment by windowed signal energy.

    Energy of each window is the mean squared sample norm; a window is
    active when its energy exceeds tau times the global mean energy.
    Returns the smallest index range covering the first through last
    active window, or the full range when nothing exceeds the threshold.
    Expects a uniformly resampled trace.
    """
    if not win_s > hop_s > 0:
        raise ValueError("require win_s > hop_s > 0")
    n = len(linear_accel)
    if n < 2:
        raise InsufficientData("trace shorter than one window")
    rate = linear_accel.rate_hz
    win = max(int(round(win_s * rate)), 1)
    hop = max(int(round(hop_s * rate)), 1)
    if n < win:
        raise InsufficientData(
            f"trace of {n} samples shorter than one {win}-sample window"
        )
    sq_norm = np.einsum("ij,ij->i", linear_accel.samples, linear_accel.samples)
    starts = np.arange(0, n - win + 1, hop)
    energies = np.array([sq_norm[s : s + win].mean() for s in starts])
    mean_energy = energies.mean()
    active = np.flatnonzero(energies > tau * mean_energy)
    if active.size == 0:
        return SegmentBounds(0, n)
    first = int(starts[active[0]])
    last_end = int(starts[active[-1]]) + win
    return SegmentBounds(first, min(last_end, n))


def pad_or_truncate(trace: SensorTrace, length: int = 1000) -> SensorTrace:
    """Force a trace to exactly `length` rows.

    Shorter inputs are zero-padded at the tail (timestamps continue the
    grid); longer inputs are truncated at the tail.
    """
    if length <= 0:
        raise InvalidLength(f"length must be positive, got {length}")
    n = len(trace)
    if n == length:
        return trace
    if n > length:
        return trace.with_data(trace.timestamps[:length], trace.samples[:length])
    if n >= 2:
        dt = (trace.timestamps[-1] - trace.timestamps[0]) / (n - 1)
    else:
        dt = 0.01
    extra_t = trace.timestamps[-1] + dt * np.arange(1, length - n + 1)
    t = np.concatenate([trace.timestamps, extra_t])
    x = np.vstack([trace.samples, np.zeros((length - n, 3))])
    return trace.with_data(t, x)


def preprocess(
    sample: "SignatureSample",
    config: PreprocessConfig | None = None,
    profile: str = "verify",
) -> "SignatureSample":
    """Run the preprocessing pipeline on every trace of a sample.

    Order: resample -> crop to the movement segment (bounds detected on
    the linear accelerometer, applied to all sensors by time window) ->
    z-score -> smooth.  The "reconstruct" profile stops after cropping:
    double integration needs physical units, which z-scoring destroys.
    Metadata and ground truth are carried over unchanged.
    """
    if config is None:
        config = PreprocessConfig()
    if profile not in ("verify", "reconstruct"):
        raise ValueError(f"unknown profile {profile!r}")
    if SensorKind.LINEAR_ACCELEROMETER not in sample.traces:
        raise MissingSensor("preprocessing requires a linear-accelerometer trace")

    resampled = {
        kind: resample(trace, config.target_hz)
        for kind, trace in sample.traces.items()
    }
    linacc = resampled[SensorKind.LINEAR_ACCELEROMETER]
    bounds = detect_movement(linacc, config.tau, config.win_s, config.hop_s)
    t_lo = linacc.timestamps[bounds.start_index]
    t_hi = linacc.timestamps[bounds.end_index - 1]

    out = {}
    for kind, trace in resampled.items():
        keep = (trace.timestamps >= t_lo - 1e-9) & (trace.timestamps <= t_hi + 1e-9)
        if keep.sum() < 2:
            raise InsufficientData(
                f"{kind.value} trace does not cover the detected gesture window"
            )
        cropped = trace.with_data(trace.timestamps[keep], trace.samples[keep])
        if profile == "verify":
            cropped = moving_average(zscore_normalize(cropped), config.smooth_window)
        out[kind] = cropped
    return dataclasses.replace(sample, traces=out)
