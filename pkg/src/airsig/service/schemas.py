"""Pydantic request/response models for the verification service API."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class NoiseSettings(BaseModel):
    accel_sigma: float = Field(0.15, ge=0)
    gyro_sigma: float = Field(0.02, ge=0)
    gyro_bias: float = Field(0.005, ge=0)
    timing_jitter: float = Field(0.08, ge=0)


class SynthRequest(BaseModel):
    out_dir: str
    users: int = Field(..., ge=1)
    sessions: int = Field(4, ge=1, le=4)
    attempts: int = Field(2, ge=1)
    forgeries_per_user: int = Field(4, ge=0)
    seed: int = 0
    noise: NoiseSettings = Field(default_factory=NoiseSettings)


class SynthResponse(BaseModel):
    dataset: str
    n_samples: int
    n_users: int


class PreprocessSettings(BaseModel):
    target_hz: float = 100.0
    tau: float = 0.225
    win_s: float = 0.20
    hop_s: float = 0.10
    smooth_window: int = 5
    pad_length: int = 1000


class PreprocessRequest(BaseModel):
    dataset: str
    out_dir: str
    profile: str = "verify"
    config: PreprocessSettings = Field(default_factory=PreprocessSettings)


class PreprocessResponse(BaseModel):
    dataset: str
    n_samples: int
    n_failed: int


class EvalCell(BaseModel):
    sensors: list[str]
    mode: str = "4vs1"
    impostor: str = "random"
    scorer: str = "dtw"


class EvalRequest(BaseModel):
    dataset: str
    out_dir: str
    cells: list[EvalCell]
    embedding_file: str | None = None
    preprocess: PreprocessSettings = Field(default_factory=PreprocessSettings)
    seed: int = 0


class ReportSummary(BaseModel):
    sensors: list[str]
    mode: str
    impostor: str
    scorer: str
    eer: float
    eer_threshold: float
    n_genuine: int
    n_impostor: int
    low_confidence: bool
    scores_file: str
    det_file: str


class EvalResponse(BaseModel):
    reports: list[ReportSummary]
    out_dir: str


class ReconstructSettings(BaseModel):
    beta: float = 0.1
    gravity: float = 9.80665
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


class ReconstructRequest(BaseModel):
    dataset: str
    sample_id: str
    out_dir: str
    profile: str = "reconstruct"
    config: ReconstructSettings = Field(default_factory=ReconstructSettings)


class ReconstructResponse(BaseModel):
    sample_id: str
    trajectory_csv: str
    projection_csv: str
    velocity_cutoff_hz: float
    position_cutoff_hz: float
    alignment_residual: float | None = None


class TracePayload(BaseModel):
    timestamps: list[float]
    samples: list[list[float]]


class SamplePayload(BaseModel):
    traces: dict[str, TracePayload]


class ScoreRequest(BaseModel):
    probe: SamplePayload
    references: list[SamplePayload]
    sensors: list[str] = Field(default_factory=lambda: ["linacc"])
    preprocess: PreprocessSettings = Field(default_factory=PreprocessSettings)


class ScoreResponse(BaseModel):
    score: float
    per_sensor: dict[str, float]


class ExportRequest(BaseModel):
    dataset: str
    out_dir: str
    length: int = Field(1000, ge=1)
    preprocess: PreprocessSettings = Field(default_factory=PreprocessSettings)
    split_seed: int = 0
    train_fraction: float = Field(0.8, gt=0, lt=1)


class ExportResponse(BaseModel):
    out_dir: str
    n_samples: int
    split_file: str
