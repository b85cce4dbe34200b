"""FastAPI service wrapping the verification and reconstruction core.

Endpoints operate on datasets living on the service host's filesystem
and write their outputs (plus a reproducibility manifest) to the
requested output directory.  /score is the interactive surface: clients
post raw sensor traces and get a verification score back.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse

from .. import __version__
from ..dataset import (
    MANIFEST_NAME,
    Label,
    SignatureSample,
    export_fixed_length,
    load_dataset,
    save_dataset,
)
from ..dtw import verify as dtw_verify
from ..errors import AirsigError
from ..evaluation import procrustes_align, run_benchmark, split_users, write_reports
from ..preprocessing import PreprocessConfig, SensorKind, SensorTrace, preprocess
from ..synth import NoiseModel, generate_population
from ..trajectory import (
    ReconstructConfig,
    highpass,
    project_points,
    project_to_plane,
    reconstruct,
)
from . import schemas

app = FastAPI(title="airsig", version=__version__)


@app.exception_handler(AirsigError)
async def airsig_error_handler(request, exc: AirsigError):
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.exception_handler(ValueError)
async def value_error_handler(request, exc: ValueError):
    return JSONResponse(status_code=400, content={"detail": str(exc)})


def _write_run_manifest(out_dir: Path, endpoint: str, request_payload: dict,
                        input_path: str | None = None) -> None:
    manifest = {
        "endpoint": endpoint,
        "request": request_payload,
        "version": __version__,
    }
    if input_path:
        p = Path(input_path)
        manifest_file = p / MANIFEST_NAME if p.is_dir() else p
        if manifest_file.is_file():
            digest = hashlib.sha256(manifest_file.read_bytes()).hexdigest()
            manifest["input_manifest_sha256"] = digest
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _preprocess_config(settings: schemas.PreprocessSettings) -> PreprocessConfig:
    return PreprocessConfig(**settings.model_dump())


def _reconstruct_config(settings: schemas.ReconstructSettings) -> ReconstructConfig:
    return ReconstructConfig(**settings.model_dump())


@app.get("/health", response_model=schemas.HealthResponse)
def health() -> schemas.HealthResponse:
    return schemas.HealthResponse(status="ok", version=__version__)


@app.post("/synth", response_model=schemas.SynthResponse)
def synth(req: schemas.SynthRequest) -> schemas.SynthResponse:
    noise = NoiseModel(**req.noise.model_dump())
    samples = generate_population(
        req.users,
        sessions=req.sessions,
        attempts=req.attempts,
        forgeries_per_user=req.forgeries_per_user,
        seed=req.seed,
        noise=noise,
    )
    out = Path(req.out_dir)
    save_dataset(samples, out)
    _write_run_manifest(out, "/synth", req.model_dump())
    return schemas.SynthResponse(
        dataset=str(out), n_samples=len(samples), n_users=req.users
    )


@app.post("/preprocess", response_model=schemas.PreprocessResponse)
def preprocess_dataset(req: schemas.PreprocessRequest) -> schemas.PreprocessResponse:
    _require_dataset(req.dataset)
    samples = load_dataset(req.dataset)
    config = _preprocess_config(req.config)
    processed, failed = [], 0
    for sample in samples:
        try:
            processed.append(preprocess(sample, config, profile=req.profile))
        except AirsigError:
            failed += 1
    out = Path(req.out_dir)
    save_dataset(processed, out)
    _write_run_manifest(out, "/preprocess", req.model_dump(), req.dataset)
    return schemas.PreprocessResponse(
        dataset=str(out), n_samples=len(processed), n_failed=failed
    )


@app.post("/eval", response_model=schemas.EvalResponse)
def evaluate(req: schemas.EvalRequest) -> schemas.EvalResponse:
    _require_dataset(req.dataset)
    samples = load_dataset(req.dataset)
    config = _preprocess_config(req.preprocess)
    needs_dtw = any(cell.scorer == "dtw" for cell in req.cells)
    scoring_set = samples
    if needs_dtw:
        scoring_set = [preprocess(s, config, profile="verify") for s in samples]
    matrix = [cell.model_dump() for cell in req.cells]
    for cell in matrix:
        cell["sensors"] = [SensorKind.from_alias(s).value for s in cell["sensors"]]
    reports = run_benchmark(scoring_set, matrix, embeddings=req.embedding_file)
    out = Path(req.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = write_reports(reports, out)
    _write_run_manifest(out, "/eval", req.model_dump(), req.dataset)
    summaries = [
        schemas.ReportSummary(**entry) for entry in payload["reports"]
    ]
    return schemas.EvalResponse(reports=summaries, out_dir=str(out))


def _filtered_reference_projection(sample: SignatureSample, traj) -> np.ndarray | None:
    """Ground-truth projection put through the same drift filters."""
    gt = sample.ground_truth
    if gt is None:
        return None
    t = gt.orientation.timestamps
    t0, t1 = traj.timestamps[0], traj.timestamps[-1]
    mask = (t >= t0 - 1e-9) & (t <= t1 + 1e-9)
    if mask.sum() < 16:
        return None
    times = t[mask]
    pos = gt.position[mask]
    rate = (len(times) - 1) / (times[-1] - times[0])
    dt = 1.0 / rate
    vel = np.gradient(pos, times, axis=0)
    vel_f = highpass(vel, traj.velocity_cutoff_hz, rate)
    pos_raw = np.zeros_like(vel_f)
    pos_raw[1:] = np.cumsum(0.5 * dt * (vel_f[1:] + vel_f[:-1]), axis=0)
    pos_f = highpass(pos_raw, traj.position_cutoff_hz, rate)
    pos_f = pos_f - pos_f[0]
    return project_points(pos_f)


@app.post("/reconstruct", response_model=schemas.ReconstructResponse)
def reconstruct_sample(req: schemas.ReconstructRequest) -> schemas.ReconstructResponse:
    _require_dataset(req.dataset)
    samples = load_dataset(req.dataset)
    matches = [s for s in samples if s.sample_id == req.sample_id]
    if not matches:
        raise HTTPException(
            status_code=404, detail=f"unknown sample id {req.sample_id!r}"
        )
    sample = matches[0]
    config = _reconstruct_config(req.config)
    if req.profile == "none":
        prepared = sample
    elif req.profile == "reconstruct":
        if config.use_ground_truth_orientation:
            raise HTTPException(
                status_code=400,
                detail="ground-truth orientation is grid-aligned; use profile=none",
            )
        prepared = preprocess(sample, PreprocessConfig(), profile="reconstruct")
    else:
        raise HTTPException(
            status_code=400, detail=f"unknown reconstruction profile {req.profile!r}"
        )
    traj = reconstruct(prepared, config)
    out = Path(req.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    traj_path = out / f"{req.sample_id}.trajectory.csv"
    header = "t,x,y,z,vx,vy,vz,ax,ay,az"
    rows = np.column_stack(
        [traj.timestamps, traj.position, traj.velocity, traj.accel_global]
    )
    lines = [header]
    for row in rows:
        lines.append(",".join(repr(float(v)) for v in row))
    traj_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    projection = project_to_plane(traj)
    proj_path = out / f"{req.sample_id}.projection.csv"
    lines = ["t,u,v"]
    for ti, (u, v) in zip(traj.timestamps, projection):
        lines.append(f"{ti!r},{u!r},{v!r}")
    proj_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    residual = None
    reference = _filtered_reference_projection(sample, traj)
    if reference is not None:
        _, residual = procrustes_align(projection, reference)
    elif sample.reference_2d is not None:
        _, residual = procrustes_align(projection, sample.reference_2d)
    _write_run_manifest(out, "/reconstruct", req.model_dump(), req.dataset)
    return schemas.ReconstructResponse(
        sample_id=req.sample_id,
        trajectory_csv=str(traj_path),
        projection_csv=str(proj_path),
        velocity_cutoff_hz=traj.velocity_cutoff_hz,
        position_cutoff_hz=traj.position_cutoff_hz,
        alignment_residual=residual,
    )


def _payload_to_sample(payload: schemas.SamplePayload, tag: str) -> SignatureSample:
    traces = {}
    for name, trace in payload.traces.items():
        kind = SensorKind.from_alias(name)
        traces[kind] = SensorTrace(
            kind, np.asarray(trace.timestamps), np.asarray(trace.samples)
        )
    return SignatureSample(
        user_id=tag,
        session=2,
        attempt=1,
        device_model="client",
        label=Label.GENUINE,
        traces=traces,
    )


@app.post("/score", response_model=schemas.ScoreResponse)
def score(req: schemas.ScoreRequest) -> schemas.ScoreResponse:
    if not req.references:
        raise HTTPException(status_code=400, detail="no enrollment references given")
    config = _preprocess_config(req.preprocess)
    sensors = [SensorKind.from_alias(s) for s in req.sensors]
    probe = preprocess(_payload_to_sample(req.probe, "probe"), config)
    refs = [
        preprocess(_payload_to_sample(p, f"ref{i}"), config)
        for i, p in enumerate(req.references)
    ]
    result = dtw_verify(refs, probe, sensors)
    return schemas.ScoreResponse(
        score=result.value,
        per_sensor={k.value: v for k, v in result.per_sensor.items()},
    )


@app.post("/export", response_model=schemas.ExportResponse)
def export(req: schemas.ExportRequest) -> schemas.ExportResponse:
    _require_dataset(req.dataset)
    samples = load_dataset(req.dataset)
    config = _preprocess_config(req.preprocess)
    processed = [preprocess(s, config, profile="verify") for s in samples]
    out = Path(req.out_dir)
    export_fixed_length(processed, out, length=req.length)
    split = split_users(
        {s.user_id for s in samples},
        train_fraction=req.train_fraction,
        seed=req.split_seed,
    )
    split_path = out / "split_manifest.json"
    split_path.write_text(
        json.dumps(split, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _write_run_manifest(out, "/export", req.model_dump(), req.dataset)
    return schemas.ExportResponse(
        out_dir=str(out), n_samples=len(processed), split_file=str(split_path)
    )


def _require_dataset(path: str) -> None:
    p = Path(path)
    manifest = p / MANIFEST_NAME if p.is_dir() else p
    if not manifest.is_file():
        raise HTTPException(status_code=404, detail=f"dataset not found at {path}")
