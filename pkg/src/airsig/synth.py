"""Synthetic in-air signature generator with analytic ground truth.

Each simulated user owns a template: a smooth spline trajectory (the
signature shape), a wrist-rotation profile (their grip dynamics), and a
sensor noise model.  Samples are forward-simulated from the template:
the spline's second derivative gives world acceleration, the rotation
profile gives the attitude q(t), and the emitted sensor traces are

    accelerometer        = R(q)^T (a_world + g z_hat)   + noise
    linear accelerometer = R(q)^T  a_world              + noise
    gyroscope            = body angular velocity of q(t) + bias + noise

so reconstructing a zero-noise sample must reproduce the (filtered)
ground-truth trajectory.  Skilled forgeries reuse the spline shape with
perturbed geometry and timing but draw an independent rotation profile:
the trajectory can be imitated, the wrist dynamics cannot.

All generation is a pure function of (template, session, attempt, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .dataset import GroundTruth, Label, SignatureSample
from .preprocessing import SegmentBounds, SensorKind, SensorTrace
from .trajectory import GRAVITY, OrientationSeries, _rotation_matrices, project_points

NOMINAL_RATE_HZ = 100.0

# per-attempt / per-session control-point jitter, fraction of gesture extent
ATTEMPT_JITTER = 0.03
SESSION_JITTER = 0.05
# forgery perturbations: shape jitter fraction and timing warp range
FORGERY_SHAPE_JITTER = 0.035
FORGERY_TIME_WARP = (0.93, 1.07)
# per-attempt wobble of the wrist-rotation node angles, fraction of amplitude
WRIST_JITTER = 0.12


@dataclass
class NoiseModel:
    """Sensor imperfections; all parameters >= 0, zero = ideal device."""

    accel_sigma: float = 0.0      # m/s^2, white, per axis
    gyro_sigma: float = 0.0       # rad/s, white, per axis
    gyro_bias: float = 0.0        # rad/s, constant per-sample bias scale
    timing_jitter: float = 0.0    # fraction of the nominal sample interval

    def __post_init__(self):
        for name in ("accel_sigma", "gyro_sigma", "gyro_bias", "timing_jitter"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass
class OrientationProfile:
    """Parametric wrist-rotation curve: smooth roll/pitch/yaw wobble on a base grip tilt."""

    amplitude_deg: float = 25.0
    base_roll_deg: float = 0.0
    base_pitch_deg: float = 0.0
    node_count: int = 6
    shape_seed: int = 0


@dataclass
class SynthUserTemplate:
    """Everything that defines one simulated user."""

    seed: int
    user_id: str
    control_points: np.ndarray  # (K, 3) meters, the signature shape
    duration_s: float
    orientation_profile: OrientationProfile
    noise: NoiseModel = field(default_factory=NoiseModel)
    device_model: str = "simdev-01"

    def __post_init__(self):
        self.control_points = np.asarray(self.control_points, dtype=np.float64)
        if self.control_points.ndim != 2 or self.control_points.shape[1] != 3:
            raise ValueError("control_points must have shape (K, 3)")
        if len(self.control_points) < 4:
            raise ValueError("need at least 4 control points for a cubic spline")
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")

    @property
    def extent(self) -> float:
        return float(np.max(np.ptp(self.control_points, axis=0)))


def make_user_template(
    user_seed: int, noise: NoiseModel | None = None
) -> SynthUserTemplate:
    """Draw a random but reproducible user template."""
    rng = np.random.default_rng(np.random.SeedSequence([int(user_seed), 101]))
    duration = float(rng.uniform(1.5, 4.0))
    # stroke density tied to duration: ~4 nodes/s keeps peak acceleration
    # in the few-m/s^2 range a wrist actually produces
    n_ctrl = int(np.clip(round(4.0 * duration) + rng.integers(-1, 2), 8, 16))
    extent = float(rng.uniform(0.12, 0.28))
    # user-specific stroke rhythm: a small bank of sinusoidal components
    # with random frequency/phase per axis, plus a wandering baseline.
    # Users differ in rhythm and loop structure, not just in where a
    # random walk happened to drift.
    tau = np.linspace(0.0, 1.0, n_ctrl)
    pts = np.zeros((n_ctrl, 3))
    for axis in range(3):
        n_modes = int(rng.integers(2, 4))
        freqs = rng.uniform(1.0, 4.0, n_modes)
        phases = rng.uniform(0.0, 2 * np.pi, n_modes)
        amps = rng.uniform(0.7, 1.0, n_modes)
        for f, ph, a in zip(freqs, phases, amps):
            pts[:, axis] += a * np.sin(2 * np.pi * f * tau + ph)
    pts += 0.35 * np.cumsum(rng.normal(size=(n_ctrl, 3)), axis=0)
    pts -= pts.mean(axis=0)
    pts[:, 2] *= 0.35  # signatures are mostly planar
    span = np.max(np.ptp(pts, axis=0))
    pts *= extent / span
    profile = OrientationProfile(
        amplitude_deg=float(rng.uniform(5.0, 11.0)),
        base_roll_deg=float(rng.uniform(-20.0, 20.0)),
        base_pitch_deg=float(rng.uniform(-20.0, 20.0)),
        node_count=int(rng.integers(5, 9)),
        shape_seed=int(rng.integers(0, 2**31)),
    )
    return SynthUserTemplate(
        seed=int(user_seed),
        user_id=f"u{int(user_seed):05d}",
        control_points=pts,
        duration_s=duration,
        orientation_profile=profile,
        noise=noise if noise is not None else NoiseModel(),
        device_model=f"simdev-{int(rng.integers(1, 9)):02d}",
    )


def _rng(*entropy: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(e) for e in entropy]))


def _euler_to_wxyz(roll, pitch, yaw) -> np.ndarray:
    """Intrinsic z-y-x (yaw, pitch, roll) Euler angles to quaternion array."""
    cr, sr = np.cos(roll / 2), np.sin(roll / 2)
    cp, sp = np.cos(pitch / 2), np.sin(pitch / 2)
    cy, sy = np.cos(yaw / 2), np.sin(yaw / 2)
    return np.stack(
        [
            cr * cp * cy + sr * sp * sy,
            sr * cp * cy - cr * sp * sy,
            cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy,
        ],
        axis=-1,
    )


def _q_mul_arrays(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    pw, px, py, pz = p[..., 0], p[..., 1], p[..., 2], p[..., 3]
    qw, qx, qy, qz = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack(
        [
            pw * qw - px * qx - py * qy - pz * qz,
            pw * qx + px * qw + py * qz - pz * qy,
            pw * qy - px * qz + py * qw + pz * qx,
            pw * qz + px * qy - py * qx + pz * qw,
        ],
        axis=-1,
    )


def _body_rates_from_quats(wxyz: np.ndarray, dts: np.ndarray) -> np.ndarray:
    """Body angular velocity such that sample i carries the rate over
    (t_{i-1}, t_i]: integrating gyro[i] from q_{i-1} recovers q_i exactly."""
    conj = wxyz[:-1] * np.array([1.0, -1.0, -1.0, -1.0])
    rel = _q_mul_arrays(conj, wxyz[1:])
    flip = rel[:, 0] < 0
    rel[flip] = -rel[flip]
    vec = rel[:, 1:]
    vec_norm = np.linalg.norm(vec, axis=1)
    angle = 2.0 * np.arctan2(vec_norm, rel[:, 0])
    omega = np.zeros_like(vec)
    ok = vec_norm > 1e-15
    omega[ok] = vec[ok] / vec_norm[ok, None] * (angle[ok] / dts[ok])[:, None]
    n = len(wxyz)
    out = np.zeros((n, 3))
    out[1:] = omega
    out[0] = omega[0] if n > 1 else 0.0
    return out


def _angle_nodes(profile: OrientationProfile, jitter_rng, amplitude_scale=1.0):
    """Wrist-angle node values (radians) with zero-clamped endpoints."""
    shape_rng = np.random.default_rng(profile.shape_seed)
    values = shape_rng.normal(
        0.0, np.radians(profile.amplitude_deg) * amplitude_scale,
        size=(profile.node_count, 3),
    )
    if jitter_rng is not None:
        values = values + jitter_rng.normal(
            0.0, np.radians(profile.amplitude_deg) * WRIST_JITTER, size=values.shape
        )
    zeros = np.zeros((1, 3))
    return np.vstack([zeros, values, zeros])


def _edge_taper_warp(u: np.ndarray, ramp: float = 0.05):
    """Monotone time warp s(u): unit speed mid-gesture, smoothstep ramps
    at both ends so ds/du and d2s/du2 vanish at u = 0 and u = 1.

    Returns (s normalized to [0, 1], ds/du, d2s/du2); the caller scales
    by the gesture duration.
    """
    u = np.asarray(u, dtype=float)
    total = 1.0 - ramp  # integral of the speed envelope
    env = np.ones_like(u)
    denv = np.zeros_like(u)
    s0 = np.empty_like(u)

    lo = u < ramp
    hi = u > 1.0 - ramp
    mid = ~(lo | hi)

    x = u[lo] / ramp
    env[lo] = 3 * x**2 - 2 * x**3
    denv[lo] = (6 * x - 6 * x**2) / ramp
    s0[lo] = ramp * (x**3 - 0.5 * x**4)

    s0[mid] = 0.5 * ramp + (u[mid] - ramp)

    x = (1.0 - u[hi]) / ramp
    env[hi] = 3 * x**2 - 2 * x**3
    denv[hi] = -(6 * x - 6 * x**2) / ramp
    s0[hi] = total - ramp * (x**3 - 0.5 * x**4)

    return s0 / total, env / total, denv / total


def _sample_grid(total_s: float, jitter: float, rng) -> np.ndarray:
    dt = 1.0 / NOMINAL_RATE_HZ
    if jitter == 0.0:
        n = int(np.floor(total_s * NOMINAL_RATE_HZ)) + 1
        return np.arange(n) * dt
    n_est = int(total_s * NOMINAL_RATE_HZ * 1.6) + 16
    dts = np.clip(1.0 + jitter * rng.normal(size=n_est), 0.3, 1.7) * dt
    t = np.concatenate([[0.0], np.cumsum(dts)])
    return t[t <= total_s]


def _synthesize(
    *,
    user_id: str,
    session: int,
    attempt: int,
    device_model: str,
    label: Label,
    ctrl_points: np.ndarray,
    duration_s: float,
    angle_nodes: np.ndarray,
    base_roll_deg: float,
    base_pitch_deg: float,
    noise: NoiseModel,
    rng: np.random.Generator,
) -> SignatureSample:
    silence_pre = float(rng.uniform(0.4, 0.8))
    silence_post = float(rng.uniform(0.4, 0.8))
    total = silence_pre + duration_s + silence_post
    t = _sample_grid(total, noise.timing_jitter, rng)

    ctrl_t = np.linspace(0.0, duration_s, len(ctrl_points))
    pos_spline = CubicSpline(ctrl_t, ctrl_points, axis=0, bc_type="clamped")
    vel_spline = pos_spline.derivative(1)
    acc_spline = pos_spline.derivative(2)

    t_rel = t - silence_pre
    in_gesture = (t_rel >= 0.0) & (t_rel <= duration_s)
    t_clamped = np.clip(t_rel, 0.0, duration_s)
    # evaluate through an edge-tapered time warp whose first and second
    # derivatives vanish at both ends: the gesture ramps up smoothly
    # instead of jerking instantly, keeping world acceleration
    # continuous at the gesture boundaries
    u = t_clamped / duration_s
    # ramp lasts ~0.06 s regardless of gesture length: onsets are crisp
    # enough for energy-based activity detection to find the true bounds
    warp_s, dwarp, ddwarp = _edge_taper_warp(u, ramp=min(0.04, 0.06 / duration_s))
    warp = duration_s * warp_s
    ddwarp = ddwarp / duration_s
    position = pos_spline(warp)
    accel_curve = (
        acc_spline(warp) * (dwarp**2)[:, None]
        + vel_spline(warp) * ddwarp[:, None]
    )
    accel_world = np.where(in_gesture[:, None], accel_curve, 0.0)

    node_t = np.linspace(0.0, duration_s, len(angle_nodes))
    ang_spline = CubicSpline(node_t, angle_nodes, axis=0, bc_type="clamped")
    # wrist rotation follows the same time warp as the stroke motion
    angles = np.where(in_gesture[:, None], ang_spline(warp), 0.0)
    q_profile = _euler_to_wxyz(angles[:, 0], angles[:, 1], angles[:, 2])
    q_base = _euler_to_wxyz(
        np.radians(base_roll_deg), np.radians(base_pitch_deg), 0.0
    )
    wxyz = _q_mul_arrays(np.broadcast_to(q_base, q_profile.shape), q_profile)
    wxyz = wxyz / np.linalg.norm(wxyz, axis=1, keepdims=True)

    rot = _rotation_matrices(wxyz)
    gravity_vec = np.array([0.0, 0.0, GRAVITY])
    # body frame = R^T world frame
    accel_body = np.einsum("nji,nj->ni", rot, accel_world + gravity_vec)
    linacc_body = np.einsum("nji,nj->ni", rot, accel_world)
    dts = np.diff(t)
    gyro_body = _body_rates_from_quats(wxyz, dts)

    if noise.accel_sigma > 0:
        accel_body = accel_body + rng.normal(0.0, noise.accel_sigma, accel_body.shape)
        linacc_body = linacc_body + rng.normal(
            0.0, noise.accel_sigma, linacc_body.shape
        )
    if noise.gyro_bias > 0:
        gyro_body = gyro_body + rng.normal(0.0, noise.gyro_bias, size=3)
    if noise.gyro_sigma > 0:
        gyro_body = gyro_body + rng.normal(0.0, noise.gyro_sigma, gyro_body.shape)

    start = int(np.searchsorted(t, silence_pre, side="left"))
    end = int(np.searchsorted(t, silence_pre + duration_s, side="right"))
    ground_truth = GroundTruth(
        position=position,
        orientation=OrientationSeries(t, wxyz),
        gesture_bounds=SegmentBounds(start, max(end, start + 1)),
    )
    traces = {
        SensorKind.ACCELEROMETER: SensorTrace(SensorKind.ACCELEROMETER, t, accel_body),
        SensorKind.LINEAR_ACCELEROMETER: SensorTrace(
            SensorKind.LINEAR_ACCELEROMETER, t, linacc_body
        ),
        SensorKind.GYROSCOPE: SensorTrace(SensorKind.GYROSCOPE, t, gyro_body),
    }
    return SignatureSample(
        user_id=user_id,
        session=session,
        attempt=attempt,
        device_model=device_model,
        label=label,
        traces=traces,
        ground_truth=ground_truth,
    )


def generate_sample(
    template: SynthUserTemplate, session: int, attempt: int, rng_seed: int = 0
) -> SignatureSample:
    """Forward-simulate one genuine recording.

    Session and attempt perturb the spline control points (5% / 3% of
    the gesture extent) and wobble the wrist profile slightly, modeling
    multi-session drift and within-session variability.
    """
    if session not in (1, 2, 3, 4):
        raise ValueError("session must be in 1..4")
    session_rng = _rng(template.seed, rng_seed, session, 11)
    attempt_rng = _rng(template.seed, rng_seed, session, attempt, 22)
    sample_rng = _rng(template.seed, rng_seed, session, attempt, 33)

    # jitter scales with each axis's own extent so per-axis z-scoring
    # later sees a uniform signal-to-jitter ratio
    axis_extent = np.ptp(template.control_points, axis=0)
    ctrl = (
        template.control_points
        + session_rng.normal(0.0, 1.0, template.control_points.shape)
        * (SESSION_JITTER * axis_extent)
        + attempt_rng.normal(0.0, 1.0, template.control_points.shape)
        * (ATTEMPT_JITTER * axis_extent)
    )
    angle_nodes = _angle_nodes(template.orientation_profile, attempt_rng)
    return _synthesize(
        user_id=template.user_id,
        session=session,
        attempt=attempt,
        device_model=template.device_model,
        label=Label.GENUINE,
        ctrl_points=ctrl,
        duration_s=template.duration_s,
        angle_nodes=angle_nodes,
        base_roll_deg=template.orientation_profile.base_roll_deg,
        base_pitch_deg=template.orientation_profile.base_pitch_deg,
        noise=template.noise,
        rng=sample_rng,
    )


def generate_forgery(
    template: SynthUserTemplate, rng_seed: int = 0, attempt: int = 1
) -> SignatureSample:
    """Simulate a skilled forgery of the template's signature.

    The forger reproduces the trajectory shape (small control-point
    jitter, global time warp) but holds the device their own way: an
    independent wrist-rotation profile and grip tilt.
    """
    forg_rng = _rng(template.seed, rng_seed, 4, attempt, 77)
    axis_extent = np.ptp(template.control_points, axis=0)
    ctrl = template.control_points + forg_rng.normal(
        0.0, 1.0, template.control_points.shape
    ) * (FORGERY_SHAPE_JITTER * axis_extent)
    duration = template.duration_s * float(forg_rng.uniform(*FORGERY_TIME_WARP))
    profile = template.orientation_profile
    forged_profile = OrientationProfile(
        amplitude_deg=profile.amplitude_deg,
        base_roll_deg=float(forg_rng.uniform(-28.0, 28.0)),
        base_pitch_deg=float(forg_rng.uniform(-28.0, 28.0)),
        node_count=profile.node_count,
        shape_seed=int(forg_rng.integers(0, 2**31)),
    )
    angle_nodes = _angle_nodes(forged_profile, None)
    return _synthesize(
        user_id=template.user_id,
        session=4,
        attempt=attempt,
        device_model=f"simdev-f{int(forg_rng.integers(1, 3))}",
        label=Label.SKILLED_FORGERY,
        ctrl_points=ctrl,
        duration_s=duration,
        angle_nodes=angle_nodes,
        base_roll_deg=forged_profile.base_roll_deg,
        base_pitch_deg=forged_profile.base_pitch_deg,
        noise=template.noise,
        rng=forg_rng,
    )


def generate_population(
    n_users: int,
    sessions: int = 4,
    attempts: int = 2,
    forgeries_per_user: int = 2,
    seed: int = 0,
    noise: NoiseModel | None = None,
    attach_reference: bool = True,
) -> list:
    """Generate a full benchmark population of genuine samples + forgeries.

    Genuine samples optionally carry a 2D reference polyline: the
    principal-plane projection of the ground-truth gesture trajectory
    (the stand-in for a paired handwritten signature).
    """
    if n_users < 1:
        raise ValueError("n_users must be >= 1")
    samples = []
    for u in range(n_users):
        template = make_user_template(seed * 100003 + u, noise=noise)
        for session in range(1, sessions + 1):
            for attempt in range(1, attempts + 1):
                sample = generate_sample(template, session, attempt, rng_seed=seed)
                if attach_reference:
                    gt = sample.ground_truth
                    b = gt.gesture_bounds
                    ref = project_points(gt.position[b.start_index : b.end_index])
                    sample = SignatureSample(
                        user_id=sample.user_id,
                        session=sample.session,
                        attempt=sample.attempt,
                        device_model=sample.device_model,
                        label=sample.label,
                        traces=sample.traces,
                        ground_truth=sample.ground_truth,
                        reference_2d=ref,
                    )
                samples.append(sample)
        for k in range(1, forgeries_per_user + 1):
            samples.append(generate_forgery(template, rng_seed=seed, attempt=k))
    return samples
