import numpy as np
import pytest

from airsig.preprocessing import SensorKind, SensorTrace
from airsig.synth import NoiseModel, OrientationProfile, SynthUserTemplate
from airsig.trajectory import highpass


def make_trace(samples, rate_hz=100.0, kind=SensorKind.ACCELEROMETER):
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] == 1 and samples.shape[1] != 3:
        samples = samples.T
    if samples.shape[1] == 1:
        samples = np.column_stack([samples[:, 0], np.zeros(len(samples)), np.zeros(len(samples))])
    t = np.arange(len(samples)) / rate_hz
    return SensorTrace(kind, t, samples)


def burst_template(seed, noise=None, duration_s=2.5):
    """Constant-envelope circular gesture: crisp, well-defined bounds."""
    theta = np.linspace(0, 4 * np.pi, 12)
    pts = 0.1 * np.column_stack([np.cos(theta), np.sin(theta), 0.2 * np.sin(2 * theta)])
    return SynthUserTemplate(
        seed=seed,
        user_id=f"burst{seed}",
        control_points=pts,
        duration_s=duration_s,
        orientation_profile=OrientationProfile(amplitude_deg=8.0, shape_seed=seed),
        noise=noise if noise is not None else NoiseModel(),
    )


def filtered_ground_truth(gt, cutoff_v, cutoff_p, rate_hz=100.0):
    """The reconstruction pipeline's filter chain applied to true positions."""
    dt = 1.0 / rate_hz
    vel = np.gradient(gt.position, dt, axis=0)
    vel_f = highpass(vel, cutoff_v, rate_hz)
    pos_raw = np.zeros_like(vel_f)
    pos_raw[1:] = np.cumsum(0.5 * dt * (vel_f[1:] + vel_f[:-1]), axis=0)
    pos_f = highpass(pos_raw, cutoff_p, rate_hz)
    return pos_f - pos_f[0]


@pytest.fixture(scope="session")
def small_population():
    from airsig.synth import generate_population

    noise = NoiseModel(accel_sigma=0.15, gyro_sigma=0.02, gyro_bias=0.005, timing_jitter=0.08)
    return generate_population(
        5, sessions=4, attempts=2, forgeries_per_user=2, seed=11, noise=noise
    )
