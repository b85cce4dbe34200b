"""3D trajectory reconstruction from accelerometer + gyroscope data.

Pipeline: attitude estimation (gyro integration with gravity-referenced
gradient correction), rotation of body acceleration into the world
frame, gravity removal, double trapezoidal integration, and first-order
zero-phase Butterworth high-pass filtering of velocity and position to
suppress drift.  Cutoffs are picked per signal from the dominant FFT
frequency unless overridden.

Conventions: quaternions are scalar-first (w, x, y, z) and map body
vectors into the world frame, v_world = q v q*.  The world z axis points
up; a level, static accelerometer reads (0, 0, +g).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.signal import butter, filtfilt

from .errors import (
    DegenerateGeometry,
    InsufficientData,
    InvalidCutoff,
    LengthMismatch,
    MissingSensor,
    NonUnitQuaternion,
)
from .preprocessing import SensorKind

if TYPE_CHECKING:
    from .dataset import SignatureSample

GRAVITY = 9.80665


@dataclass(frozen=True)
class Quaternion:
    """Unit attitude quaternion, scalar-first."""

    w: float
    x: float
    y: float
    z: float

    def norm(self) -> float:
        return math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)

    def normalized(self) -> "Quaternion":
        n = self.norm()
        if n < 1e-12:
            return Quaternion(1.0, 0.0, 0.0, 0.0)
        return Quaternion(self.w / n, self.x / n, self.y / n, self.z / n)

    def conjugate(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])


Quaternion.IDENTITY = Quaternion(1.0, 0.0, 0.0, 0.0)


def q_multiply(p: Quaternion, q: Quaternion) -> Quaternion:
    """Hamilton product p (x) q."""
    return Quaternion(
        p.w * q.w - p.x * q.x - p.y * q.y - p.z * q.z,
        p.w * q.x + p.x * q.w + p.y * q.z - p.z * q.y,
        p.w * q.y - p.x * q.z + p.y * q.w + p.z * q.x,
        p.w * q.z + p.x * q.y - p.y * q.x + p.z * q.w,
    )


def q_from_axis_angle(axis, angle_rad: float) -> Quaternion:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        return Quaternion.IDENTITY
    axis = axis / n
    half = 0.5 * angle_rad
    s = math.sin(half)
    return Quaternion(math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s)


def rotation_matrix(q: Quaternion) -> np.ndarray:
    """3x3 matrix R(q) mapping body vectors to world vectors."""
    w, x, y, z = q.w, q.x, q.y, q.z
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def q_rotate(q: Quaternion, v) -> np.ndarray:
    """Rotate a 3-vector by a unit quaternion (q v q*). Norm-preserving."""
    if abs(q.norm() - 1.0) > 1e-6:
        raise NonUnitQuaternion(f"|q| = {q.norm():.8f} deviates from 1")
    return rotation_matrix(q) @ np.asarray(v, dtype=float)


def integrate_gyro(
    q: Quaternion, omega, dt: float, method: str = "euler"
) -> Quaternion:
    """One attitude step under body angular velocity `omega` (rad/s).

    "euler":  q <- normalize(q + dt * 1/2 * q (x) [0, omega])
    "exact":  q <- q (x) exp(1/2 * dt * [0, omega])  (axis-angle step)
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    wx, wy, wz = float(omega[0]), float(omega[1]), float(omega[2])
    if method == "euler":
        dq = q_multiply(q, Quaternion(0.0, wx, wy, wz))
        return Quaternion(
            q.w + 0.5 * dt * dq.w,
            q.x + 0.5 * dt * dq.x,
            q.y + 0.5 * dt * dq.y,
            q.z + 0.5 * dt * dq.z,
        ).normalized()
    if method == "exact":
        angle = math.sqrt(wx * wx + wy * wy + wz * wz) * dt
        if angle < 1e-15:
            return q
        step = q_from_axis_angle((wx, wy, wz), angle)
        return q_multiply(q, step).normalized()
    raise ValueError(f"unknown integration method {method!r}")


def madgwick_update(
    state: Quaternion,
    accel,
    gyro,
    dt: float,
    beta: float,
    accel_tolerance: float | None = None,
    gravity: float = GRAVITY,
) -> Quaternion:
    """Gyro propagation corrected toward the measured gravity direction.

    The correction is the beta-scaled normalized gradient of the
    gravity-alignment objective (IMU variant, no magnetometer).  With a
    near-zero accelerometer reading the correction is skipped and the
    step reduces to plain gyro integration, as it does for beta = 0.

    `accel_tolerance`, when set, additionally gates the correction: the
    accelerometer only references gravity while the device is quasi-
    static, so steps where |‖accel‖ - g| exceeds tolerance * g fall
    back to the gyro-only update instead of chasing motion acceleration.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if beta < 0:
        raise ValueError("beta must be non-negative")
    ax, ay, az = float(accel[0]), float(accel[1]), float(accel[2])
    a_norm = math.sqrt(ax * ax + ay * ay + az * az)
    gated = (
        accel_tolerance is not None
        and abs(a_norm - gravity) > accel_tolerance * gravity
    )
    if beta == 0.0 or a_norm < 1e-6 or gated:
        return integrate_gyro(state, gyro, dt, method="euler")

    ax, ay, az = ax / a_norm, ay / a_norm, az / a_norm
    q1, q2, q3, q4 = state.w, state.x, state.y, state.z

    # objective: predicted body-frame gravity direction minus measured one
    f1 = 2.0 * (q2 * q4 - q1 * q3) - ax
    f2 = 2.0 * (q1 * q2 + q3 * q4) - ay
    f3 = 2.0 * (0.5 - q2 * q2 - q3 * q3) - az
    s1 = -2.0 * q3 * f1 + 2.0 * q2 * f2
    s2 = 2.0 * q4 * f1 + 2.0 * q1 * f2 - 4.0 * q2 * f3
    s3 = -2.0 * q1 * f1 + 2.0 * q4 * f2 - 4.0 * q3 * f3
    s4 = 2.0 * q2 * f1 + 2.0 * q3 * f2
    s_norm = math.sqrt(s1 * s1 + s2 * s2 + s3 * s3 + s4 * s4)
    if s_norm > 1e-12:
        s1, s2, s3, s4 = s1 / s_norm, s2 / s_norm, s3 / s_norm, s4 / s_norm
    else:
        s1 = s2 = s3 = s4 = 0.0

    gx, gy, gz = float(gyro[0]), float(gyro[1]), float(gyro[2])
    qdot1 = 0.5 * (-q2 * gx - q3 * gy - q4 * gz) - beta * s1
    qdot2 = 0.5 * (q1 * gx + q3 * gz - q4 * gy) - beta * s2
    qdot3 = 0.5 * (q1 * gy - q2 * gz + q4 * gx) - beta * s3
    qdot4 = 0.5 * (q1 * gz + q2 * gy - q3 * gx) - beta * s4
    return Quaternion(
        q1 + qdot1 * dt, q2 + qdot2 * dt, q3 + qdot3 * dt, q4 + qdot4 * dt
    ).normalized()


@dataclass(frozen=True)
class OrientationSeries:
    """Attitude quaternion per sample, unit-norm and sign-continuous.

    wxyz is an (N, 4) scalar-first array.
    """

    timestamps: np.ndarray
    wxyz: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=np.float64)
        q = np.asarray(self.wxyz, dtype=np.float64)
        if q.ndim != 2 or q.shape[1] != 4:
            raise ValueError(f"wxyz must have shape (N, 4), got {q.shape}")
        if len(t) != len(q):
            raise LengthMismatch("timestamps and quaternions differ in length")
        norms = np.linalg.norm(q, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise NonUnitQuaternion("orientation series contains non-unit quaternions")
        q = q / norms[:, None]
        # enforce sign continuity: dot(q_i, q_{i+1}) >= 0
        q = q.copy()
        for i in range(1, len(q)):
            if np.dot(q[i - 1], q[i]) < 0:
                q[i] = -q[i]
        t = t.copy()
        t.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "wxyz", q)

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def quaternions(self) -> list[Quaternion]:
        return [Quaternion(*row) for row in self.wxyz]


@dataclass(frozen=True)
class Trajectory3D:
    """Reconstructed position with intermediate velocity and world accel.

    position[0] and velocity[0] are pinned to the origin by convention.
    The cutoff fields record the high-pass frequencies actually applied.
    """

    timestamps: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    accel_global: np.ndarray
    velocity_cutoff_hz: float | None = None
    position_cutoff_hz: float | None = None

    def __post_init__(self):
        n = len(self.timestamps)
        for name in ("position", "velocity", "accel_global"):
            arr = getattr(self, name)
            if arr.shape != (n, 3):
                raise LengthMismatch(f"{name} must have shape ({n}, 3)")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
        if np.any(np.abs(self.position[0]) > 1e-9) or np.any(
            np.abs(self.velocity[0]) > 1e-9
        ):
            raise ValueError("trajectory must start at zero position and velocity")


@dataclass
class ReconstructConfig:
    """Knobs of the reconstruction pipeline.

    `accel_tolerance` gates the attitude filter's gravity correction to
    quasi-static stretches (|‖accel‖ - g| within tolerance * g).
    `cutoff_search_floor_hz` is where the dominant-frequency search for
    the drift filters starts: integrated drift pollutes the spectrum
    below it, while genuine stroke dynamics live above.
    """

    beta: float = 0.1
    gravity: float = GRAVITY
    gyro_method: str = "euler"
    accel_tolerance: float | None = 0.03
    motion_gate_ms2: float | None = 0.15
    gyro_gate_rad_s: float | None = 0.25
    velocity_cutoff_hz: float | None = None
    position_cutoff_hz: float | None = None
    cutoff_scale: float = 0.3
    cutoff_floor_hz: float = 0.1
    cutoff_ceiling_hz: float = 1.0
    cutoff_search_floor_hz: float = 1.0
    use_ground_truth_orientation: bool = False


def _tilt_from_accel(accel) -> Quaternion:
    """Initial attitude from one accelerometer sample: tilt only, yaw = 0.

    Roll and pitch are recovered from the measured gravity direction
    (z-y-x Euler convention); the unobservable yaw is pinned to zero.
    """
    a = np.asarray(accel, dtype=float)
    n = np.linalg.norm(a)
    if n < 1e-9:
        return Quaternion.IDENTITY
    ax, ay, az = a / n
    roll = math.atan2(ay, az)
    pitch = math.atan2(-ax, math.sqrt(ay * ay + az * az))
    q_pitch = q_from_axis_angle((0.0, 1.0, 0.0), pitch)
    q_roll = q_from_axis_angle((1.0, 0.0, 0.0), roll)
    return q_multiply(q_pitch, q_roll).normalized()


def estimate_orientation(
    sample: "SignatureSample",
    beta: float = 0.1,
    gyro_method: str = "euler",
    accel_tolerance: float | None = None,
    motion_gate_ms2: float | None = None,
    gyro_gate_rad_s: float | None = None,
    gravity: float = GRAVITY,
) -> OrientationSeries:
    """Madgwick-filtered attitude over a sample's common sensor grid.

    The initial quaternion comes from the first accelerometer sample
    (gravity tilt, yaw fixed to zero since it is unobservable without a
    magnetometer).

    `motion_gate_ms2` and `gyro_gate_rad_s` restrict the gravity
    correction to quasi-static samples: where the linear-accelerometer
    norm (user-induced motion) or the gyro rate exceeds its gate, the
    step is gyro-only.  The accelerometer points along gravity only at
    rest, and a magnitude test alone cannot catch horizontal motion (it
    barely changes ‖accel‖), so the motion gate uses the linear
    accelerometer when the sample carries one; `accel_tolerance`
    magnitude gating remains as the fallback.
    """
    for kind in (SensorKind.ACCELEROMETER, SensorKind.GYROSCOPE):
        if kind not in sample.traces:
            raise MissingSensor(f"orientation estimation requires {kind.value}")
    acc = sample.traces[SensorKind.ACCELEROMETER]
    gyro = sample.traces[SensorKind.GYROSCOPE]
    if len(acc) != len(gyro):
        raise LengthMismatch(
            f"accelerometer ({len(acc)}) and gyroscope ({len(gyro)}) grids differ"
        )
    motion_norm = None
    if motion_gate_ms2 is not None and SensorKind.LINEAR_ACCELEROMETER in sample.traces:
        linacc = sample.traces[SensorKind.LINEAR_ACCELEROMETER]
        if len(linacc) == len(acc):
            motion_norm = np.linalg.norm(linacc.samples, axis=1)
    rate_norm = None
    if gyro_gate_rad_s is not None:
        rate_norm = np.linalg.norm(gyro.samples, axis=1)
    t = acc.timestamps
    q = _tilt_from_accel(acc.samples[0])
    out = np.empty((len(acc), 4))
    out[0] = q.as_array()
    for i in range(1, len(acc)):
        dt = t[i] - t[i - 1]
        in_motion = (
            motion_norm is not None and motion_norm[i] > motion_gate_ms2
        ) or (rate_norm is not None and rate_norm[i] > gyro_gate_rad_s)
        if beta == 0.0 or in_motion:
            q = integrate_gyro(q, gyro.samples[i], dt, method=gyro_method)
        else:
            q = madgwick_update(
                q, acc.samples[i], gyro.samples[i], dt, beta,
                accel_tolerance=accel_tolerance, gravity=gravity,
            )
        out[i] = q.as_array()
    return OrientationSeries(t, out)


def _rotation_matrices(wxyz: np.ndarray) -> np.ndarray:
    """(N, 3, 3) rotation matrices from an (N, 4) quaternion array."""
    w, x, y, z = wxyz[:, 0], wxyz[:, 1], wxyz[:, 2], wxyz[:, 3]
    R = np.empty((len(wxyz), 3, 3))
    R[:, 0, 0] = 1 - 2 * (y * y + z * z)
    R[:, 0, 1] = 2 * (x * y - w * z)
    R[:, 0, 2] = 2 * (x * z + w * y)
    R[:, 1, 0] = 2 * (x * y + w * z)
    R[:, 1, 1] = 1 - 2 * (x * x + z * z)
    R[:, 1, 2] = 2 * (y * z - w * x)
    R[:, 2, 0] = 2 * (x * z - w * y)
    R[:, 2, 1] = 2 * (y * z + w * x)
    R[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def to_global_accel(
    sample: "SignatureSample",
    orientation: OrientationSeries,
    g: float = GRAVITY,
) -> np.ndarray:
    """Rotate body accelerometer samples into the world frame, remove gravity."""
    if SensorKind.ACCELEROMETER not in sample.traces:
        raise MissingSensor("world-frame acceleration requires the accelerometer")
    acc = sample.traces[SensorKind.ACCELEROMETER]
    if len(acc) != len(orientation):
        raise LengthMismatch(
            f"trace length {len(acc)} != orientation length {len(orientation)}"
        )
    R = _rotation_matrices(orientation.wxyz)
    world = np.einsum("nij,nj->ni", R, acc.samples)
    world[:, 2] -= g
    return world


def integrate_motion(accel_global: np.ndarray, dt: float):
    """Trapezoidal double integration with zero initial velocity/position."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    a = np.asarray(accel_global, dtype=float)
    velocity = _cumtrapz(a, dt)
    position = _cumtrapz(velocity, dt)
    return velocity, position


def _cumtrapz(x: np.ndarray, dt: float) -> np.ndarray:
    out = np.zeros_like(x)
    if len(x) > 1:
        out[1:] = np.cumsum(0.5 * dt * (x[1:] + x[:-1]), axis=0)
    return out


def select_cutoff(
    series: np.ndarray,
    rate_hz: float,
    scale: float = 0.3,
    floor_hz: float = 0.1,
    ceiling_hz: float = 1.0,
    min_freq_hz: float = 0.05,
) -> float:
    """High-pass cutoff from the dominant frequency of the sample norms.

    Heuristic: cutoff = clamp(scale * f_dominant, floor, ceiling), where
    f_dominant is the magnitude-spectrum peak above `min_freq_hz`.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim == 1:
        series = series[:, None]
    n = series.shape[0]
    if n < 16:
        raise InsufficientData("cutoff selection needs at least 16 samples")
    mag = np.linalg.norm(series, axis=1)
    spectrum = np.abs(np.fft.rfft(mag))
    freqs = np.fft.rfftfreq(n, d=1.0 / rate_hz)
    mask = freqs > min_freq_hz
    if not np.any(mask):
        return floor_hz
    f_dom = float(freqs[mask][np.argmax(spectrum[mask])])
    return float(np.clip(scale * f_dom, floor_hz, ceiling_hz))


def highpass(series: np.ndarray, cutoff_hz: float, rate_hz: float) -> np.ndarray:
    """First-order Butterworth high-pass, forward-backward (zero phase)."""
    if not 0 < cutoff_hz < rate_hz / 2:
        raise InvalidCutoff(
            f"cutoff {cutoff_hz} Hz outside (0, {rate_hz / 2}) Hz"
        )
    series = np.asarray(series, dtype=float)
    b, a = butter(1, cutoff_hz, btype="highpass", fs=rate_hz)
    return filtfilt(b, a, series, axis=0)


def reconstruct(sample: "SignatureSample", config: ReconstructConfig | None = None) -> Trajectory3D:
    """Full reconstruction: attitude -> world accel -> filtered double integral.

    Expects a resampled, movement-cropped sample in physical units (the
    "reconstruct" preprocessing profile; z-scored traces would destroy
    the m/s^2 scale that integration requires).
    """
    if config is None:
        config = ReconstructConfig()
    if config.use_ground_truth_orientation:
        if sample.ground_truth is None:
            raise ValueError(
                "ground-truth orientation requested but sample has none"
            )
        orientation = sample.ground_truth.orientation
    else:
        orientation = estimate_orientation(
            sample,
            config.beta,
            config.gyro_method,
            accel_tolerance=config.accel_tolerance,
            motion_gate_ms2=config.motion_gate_ms2,
            gyro_gate_rad_s=config.gyro_gate_rad_s,
            gravity=config.gravity,
        )

    accel_global = to_global_accel(sample, orientation, config.gravity)
    acc = sample.traces[SensorKind.ACCELEROMETER]
    t = acc.timestamps
    rate = acc.rate_hz
    dt = 1.0 / rate

    velocity_raw = _cumtrapz(accel_global, dt)
    cutoff_v = config.velocity_cutoff_hz
    if cutoff_v is None:
        cutoff_v = select_cutoff(
            velocity_raw,
            rate,
            config.cutoff_scale,
            config.cutoff_floor_hz,
            config.cutoff_ceiling_hz,
            min_freq_hz=config.cutoff_search_floor_hz,
        )
    velocity = highpass(velocity_raw, cutoff_v, rate)

    position_raw = _cumtrapz(velocity, dt)
    cutoff_p = config.position_cutoff_hz
    if cutoff_p is None:
        cutoff_p = select_cutoff(
            position_raw,
            rate,
            config.cutoff_scale,
            config.cutoff_floor_hz,
            config.cutoff_ceiling_hz,
            min_freq_hz=config.cutoff_search_floor_hz,
        )
    position = highpass(position_raw, cutoff_p, rate)

    # pin the start to the origin (filtering shifts the first sample)
    velocity = velocity - velocity[0]
    position = position - position[0]
    return Trajectory3D(
        timestamps=t,
        position=position,
        velocity=velocity,
        accel_global=accel_global,
        velocity_cutoff_hz=float(cutoff_v),
        position_cutoff_hz=float(cutoff_p),
    )


def project_to_plane(traj: Trajectory3D) -> np.ndarray:
    """Project trajectory positions onto their two leading principal axes.

    The first axis is oriented to correlate positively with time order;
    axis signs are otherwise fixed deterministically.  Raises on
    collinear clouds, where no plane is defined.
    """
    return project_points(traj.position)


def project_points(positions) -> np.ndarray:
    """Principal-plane projection of an ordered (N, 3) point cloud."""
    pos = np.asarray(positions, dtype=float)
    n = len(pos)
    if n < 3:
        raise DegenerateGeometry("projection needs at least 3 points")
    centered = pos - pos.mean(axis=0)
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    if svals[0] < 1e-12 or svals[1] < 1e-8 * svals[0]:
        raise DegenerateGeometry("position cloud is collinear or a single point")
    axes = vt[:2].copy()
    for k in range(2):
        pivot = np.argmax(np.abs(axes[k]))
        if axes[k, pivot] < 0:
            axes[k] = -axes[k]
    proj = centered @ axes.T
    order = np.arange(n) - (n - 1) / 2.0
    if float(np.dot(proj[:, 0], order)) < 0:
        proj[:, 0] = -proj[:, 0]
    return proj
