"""Multivariate DTW distance, exponential score mapping, and verification.

The local cost is the per-frame Euclidean distance over the 3 axes
(dependent multivariate DTW); the step set is the symmetric
{(1,0),(0,1),(1,1)} with unit weights and no global window by default.
The similarity score maps the accumulated distance d and alignment path
length K to 1 - exp(-d/K), so lower means more genuine-like.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.spatial.distance import cdist

from .errors import EmptyEnrollment, EmptySequence, MissingSensor


@dataclass(frozen=True)
class DtwResult:
    """Optimal alignment of two sequences.

    distance:     accumulated cost of the optimal path (>= 0)
    path_length:  number of cells on the path (K)
    warping_path: (K, 2) index pairs from (0,0) to (N-1,M-1)
    """

    distance: float
    path_length: int
    warping_path: np.ndarray


@dataclass(frozen=True)
class MatchScore:
    """Fused dissimilarity score in [0, 1); lower = more genuine-like."""

    value: float
    per_sensor: dict = field(default_factory=dict)


@njit(cache=True)
def _dtw_core(cost):
    """Accumulate the DP matrix over `cost` and backtrack the optimal path."""
    n, m = cost.shape
    acc = np.empty((n, m))
    acc[0, 0] = cost[0, 0]
    for j in range(1, m):
        acc[0, j] = acc[0, j - 1] + cost[0, j]
    for i in range(1, n):
        acc[i, 0] = acc[i - 1, 0] + cost[i, 0]
        for j in range(1, m):
            best = acc[i - 1, j - 1]
            if acc[i - 1, j] < best:
                best = acc[i - 1, j]
            if acc[i, j - 1] < best:
                best = acc[i, j - 1]
            acc[i, j] = cost[i, j] + best

    path = np.empty((n + m - 1, 2), dtype=np.int64)
    i, j = n - 1, m - 1
    k = 0
    path[k, 0] = i
    path[k, 1] = j
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag = acc[i - 1, j - 1]
            up = acc[i - 1, j]
            left = acc[i, j - 1]
            if diag <= up and diag <= left:
                i -= 1
                j -= 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        k += 1
        path[k, 0] = i
        path[k, 1] = j
    return acc[n - 1, m - 1], path[: k + 1][::-1].copy()


def _as_frames(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise EmptySequence("DTW input must be a non-empty (N, d) series")
    if not np.all(np.isfinite(x)):
        raise ValueError("DTW input contains non-finite values")
    return x


def dtw_distance(a, b, window: int | None = None) -> DtwResult:
    """Classic DP alignment of two frame series under Euclidean local cost.

    `window` optionally applies a Sakoe-Chiba band of the given
    half-width (widened to |N-M| when narrower, so a path always
    exists).  Distance is symmetric and zero iff all aligned frames
    coincide.
    """
    a = _as_frames(a)
    b = _as_frames(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"frame dimension mismatch: {a.shape[1]} vs {b.shape[1]}"
        )
    cost = cdist(a, b)
    if window is not None:
        if window < 0:
            raise ValueError("window must be non-negative")
        half = max(window, abs(a.shape[0] - b.shape[0]))
        i_idx = np.arange(a.shape[0])[:, None]
        j_idx = np.arange(b.shape[0])[None, :]
        cost = np.where(np.abs(i_idx - j_idx) <= half, cost, np.inf)
    distance, path = _dtw_core(cost)
    return DtwResult(float(distance), len(path), path)


def dtw_score(a, b, window: int | None = None) -> MatchScore:
    """Score two series as 1 - exp(-d/K); in [0, 1), 0 iff d == 0."""
    result = dtw_distance(a, b, window=window)
    value = 1.0 - np.exp(-result.distance / result.path_length)
    return MatchScore(float(value))


def _sensor_score(
    probe_trace, ref_trace, window: int | None, per_axis: bool
) -> float:
    if per_axis:
        # independent-DTW variant: one 1-D alignment per axis, scores averaged
        vals = [
            dtw_score(probe_trace.samples[:, k], ref_trace.samples[:, k], window).value
            for k in range(3)
        ]
        return float(np.mean(vals))
    return dtw_score(probe_trace.samples, ref_trace.samples, window).value


def score_pair(
    probe,
    reference,
    sensors,
    weights: dict | None = None,
    window: int | None = None,
    per_axis: bool = False,
) -> MatchScore:
    """Per-sensor DTW scores fused by (weighted) arithmetic mean.

    Both samples must carry every requested sensor; inputs are expected
    to be preprocessed.  `weights` maps SensorKind to a relative weight
    (default: unweighted mean).
    """
    kinds = sorted(set(sensors), key=lambda k: k.value)
    if not kinds:
        raise ValueError("sensor set must be non-empty")
    per_sensor = {}
    for kind in kinds:
        if kind not in probe.traces or kind not in reference.traces:
            raise MissingSensor(f"sample lacks {kind.value} trace")
        per_sensor[kind] = _sensor_score(
            probe.traces[kind], reference.traces[kind], window, per_axis
        )
    if weights:
        w = np.array([weights.get(k, 1.0) for k in kinds], dtype=float)
        if w.sum() <= 0:
            raise ValueError("sensor weights must sum to a positive value")
        fused = float(np.dot(w, [per_sensor[k] for k in kinds]) / w.sum())
    else:
        fused = float(np.mean([per_sensor[k] for k in kinds]))
    return MatchScore(fused, per_sensor)


def verify(
    enrollment,
    probe,
    sensors,
    weights: dict | None = None,
    window: int | None = None,
    per_axis: bool = False,
) -> MatchScore:
    """Average score_pair over an enrollment set (1vs1 or 4vs1)."""
    enrollment = list(enrollment)
    if not enrollment:
        raise EmptyEnrollment("enrollment set is empty")
    scores = [
        score_pair(probe, ref, sensors, weights, window, per_axis)
        for ref in enrollment
    ]
    kinds = sorted(set(sensors), key=lambda k: k.value)
    per_sensor = {
        kind: float(np.mean([s.per_sensor[kind] for s in scores])) for kind in kinds
    }
    return MatchScore(float(np.mean([s.value for s in scores])), per_sensor)
