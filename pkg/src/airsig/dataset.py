"""Canonical on-disk dataset schema and loaders.

A dataset is a directory with a `manifest.json` listing samples; each
trace lives in its own CSV (header `t,x,y,z`, UTF-8, LF endings).
Floats are written with shortest round-trip formatting, so
load(save(x)) reproduces timestamps and samples bit-exactly.  Synthetic
samples may carry ground truth (true positions and orientation) and an
optional 2D reference polyline for alignment experiments.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import MalformedTrace, MissingManifest, MissingSensor, ParseError
from .preprocessing import SegmentBounds, SensorKind, SensorTrace, pad_or_truncate
from .trajectory import OrientationSeries

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
SCHEMA_VERSION = "airsig-dataset/1"
TRACE_HEADER = "t,x,y,z"
ORIENTATION_HEADER = "t,qw,qx,qy,qz"
FIXED_CHANNELS = [
    "acc_x", "acc_y", "acc_z",
    "linacc_x", "linacc_y", "linacc_z",
    "gyro_x", "gyro_y", "gyro_z",
]


class Label(str, Enum):
    GENUINE = "genuine"
    SKILLED_FORGERY = "skilled_forgery"
    RANDOM_IMPOSTOR_REF = "random_impostor_ref"


@dataclass(frozen=True)
class GroundTruth:
    """Analytic ground truth attached to synthetic samples only."""

    position: np.ndarray  # (N, 3) meters, world frame
    orientation: OrientationSeries
    gesture_bounds: SegmentBounds

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError(f"position must be (N, 3), got {pos.shape}")
        if len(pos) != len(self.orientation):
            raise ValueError("position and orientation lengths differ")
        pos = pos.copy()
        pos.setflags(write=False)
        object.__setattr__(self, "position", pos)


@dataclass(frozen=True)
class SignatureSample:
    """One recording: sensor traces plus acquisition metadata."""

    user_id: str
    session: int
    attempt: int
    device_model: str
    label: Label
    traces: dict
    ground_truth: GroundTruth | None = None
    reference_2d: np.ndarray | None = None

    def __post_init__(self):
        if self.session not in (1, 2, 3, 4):
            raise ValueError(f"session must be 1..4, got {self.session}")
        if not self.traces:
            raise ValueError("sample must carry at least one trace")
        starts = [tr.timestamps[0] for tr in self.traces.values()]
        ends = [tr.timestamps[-1] for tr in self.traces.values()]
        if max(starts) > min(ends):
            raise ValueError("sample traces do not overlap in time")

    @property
    def sample_id(self) -> str:
        return f"{self.user_id}-s{self.session}-a{self.attempt:02d}-{self.label.value}"


def _format_rows(columns) -> str:
    """Rows of repr-formatted floats; repr round-trips float64 exactly."""
    arrays = [np.asarray(c, dtype=np.float64) for c in columns]
    lines = []
    for row in zip(*arrays):
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def _write_csv(path: Path, header: str, columns) -> None:
    path.write_text(header + "\n" + _format_rows(columns), encoding="utf-8")


def _read_csv(path: Path, header: str, n_cols: int) -> np.ndarray:
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0].strip() != header:
        raise ParseError(f"{path}: expected header {header!r}")
    try:
        data = np.array(
            [[float(v) for v in line.split(",")] for line in lines[1:] if line],
            dtype=np.float64,
        )
    except ValueError as exc:
        raise ParseError(f"{path}: non-numeric value ({exc})") from exc
    if data.size == 0:
        data = data.reshape(0, n_cols)
    if data.ndim != 2 or data.shape[1] != n_cols:
        raise ParseError(f"{path}: expected {n_cols} columns")
    return data


def save_dataset(samples, path) -> None:
    """Write samples to `path` in the canonical layout (manifest + CSVs)."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for sample in samples:
        rel_dir = Path("samples") / sample.sample_id
        sample_dir = root / rel_dir
        sample_dir.mkdir(parents=True, exist_ok=True)
        trace_files = {}
        for kind in sorted(sample.traces, key=lambda k: k.value):
            trace = sample.traces[kind]
            rel = rel_dir / f"{kind.value}.csv"
            _write_csv(
                root / rel,
                TRACE_HEADER,
                [trace.timestamps] + [trace.samples[:, k] for k in range(3)],
            )
            trace_files[kind.value] = str(rel)
        entry = {
            "sample_id": sample.sample_id,
            "user_id": sample.user_id,
            "session": sample.session,
            "attempt": sample.attempt,
            "device_model": sample.device_model,
            "label": sample.label.value,
            "trace_files": trace_files,
        }
        if sample.ground_truth is not None:
            gt = sample.ground_truth
            pos_rel = rel_dir / "gt_position.csv"
            ori_rel = rel_dir / "gt_orientation.csv"
            _write_csv(
                root / pos_rel,
                TRACE_HEADER,
                [gt.orientation.timestamps] + [gt.position[:, k] for k in range(3)],
            )
            _write_csv(
                root / ori_rel,
                ORIENTATION_HEADER,
                [gt.orientation.timestamps] + [gt.orientation.wxyz[:, k] for k in range(4)],
            )
            entry["ground_truth_files"] = {
                "position": str(pos_rel),
                "orientation": str(ori_rel),
            }
            entry["gesture_bounds"] = [
                gt.gesture_bounds.start_index,
                gt.gesture_bounds.end_index,
            ]
        if sample.reference_2d is not None:
            ref_rel = rel_dir / "reference2d.csv"
            ref = np.asarray(sample.reference_2d, dtype=np.float64)
            _write_csv(root / ref_rel, "u,v", [ref[:, 0], ref[:, 1]])
            entry["reference_file"] = str(ref_rel)
        entries.append(entry)
    manifest = {"schema": SCHEMA_VERSION, "samples": entries}
    (root / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _parse_entry(root: Path, entry: dict) -> SignatureSample:
    for key in ("user_id", "session", "attempt", "device_model", "label", "trace_files"):
        if key not in entry:
            raise ParseError(f"{root / MANIFEST_NAME}: sample entry missing field {key!r}")
    try:
        label = Label(entry["label"])
    except ValueError as exc:
        raise ParseError(
            f"{root / MANIFEST_NAME}: unknown label {entry['label']!r}"
        ) from exc
    traces = {}
    for kind_name, rel in entry["trace_files"].items():
        try:
            kind = SensorKind(kind_name)
        except ValueError as exc:
            raise ParseError(
                f"{root / MANIFEST_NAME}: unknown sensor kind {kind_name!r}"
            ) from exc
        trace_path = root / rel
        if not trace_path.is_file():
            raise ParseError(f"manifest references missing file {trace_path}")
        data = _read_csv(trace_path, TRACE_HEADER, 4)
        traces[kind] = SensorTrace(kind, data[:, 0], data[:, 1:4])
    ground_truth = None
    if "ground_truth_files" in entry:
        gt_files = entry["ground_truth_files"]
        pos = _read_csv(root / gt_files["position"], TRACE_HEADER, 4)
        ori = _read_csv(root / gt_files["orientation"], ORIENTATION_HEADER, 5)
        bounds = entry.get("gesture_bounds", [0, len(pos)])
        ground_truth = GroundTruth(
            position=pos[:, 1:4],
            orientation=OrientationSeries(ori[:, 0], ori[:, 1:5]),
            gesture_bounds=SegmentBounds(int(bounds[0]), int(bounds[1])),
        )
    reference_2d = None
    if "reference_file" in entry:
        ref = _read_csv(root / entry["reference_file"], "u,v", 2)
        reference_2d = ref
    return SignatureSample(
        user_id=str(entry["user_id"]),
        session=int(entry["session"]),
        attempt=int(entry["attempt"]),
        device_model=str(entry["device_model"]),
        label=label,
        traces=traces,
        ground_truth=ground_truth,
        reference_2d=reference_2d,
    )


def load_dataset(path) -> list:
    """Load all samples under `path`.

    Manifest-level problems (missing manifest, missing referenced files,
    schema violations) raise; samples whose trace *contents* are invalid
    (e.g. non-monotonic timestamps) are skipped with a logged warning so
    one bad recording cannot poison a whole dataset.
    """
    root = Path(path)
    manifest_path = root / MANIFEST_NAME if root.is_dir() else root
    if manifest_path.name != MANIFEST_NAME or not manifest_path.is_file():
        raise MissingManifest(f"no {MANIFEST_NAME} found at {path}")
    root = manifest_path.parent
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{manifest_path}: invalid JSON ({exc})") from exc
    if manifest.get("schema") != SCHEMA_VERSION:
        raise ParseError(
            f"{manifest_path}: unsupported schema {manifest.get('schema')!r}"
        )
    samples = []
    for entry in manifest.get("samples", []):
        try:
            samples.append(_parse_entry(root, entry))
        except (MalformedTrace, ValueError) as exc:
            log.warning(
                "skipping sample %s: %s", entry.get("sample_id", "<unknown>"), exc
            )
    return samples


def export_fixed_length(samples, path, length: int = 1000) -> None:
    """Write the fixed-length exchange format for the neural branch.

    One CSV per sample with exactly `length` rows and 9 columns
    (acc xyz, linacc xyz, gyro xyz; zero-padded or truncated at the
    tail), plus a sidecar manifest mapping files to sample ids and
    labels.  Samples are expected to be preprocessed.
    """
    root = Path(path)
    (root / "fixed").mkdir(parents=True, exist_ok=True)
    required = [
        SensorKind.ACCELEROMETER,
        SensorKind.LINEAR_ACCELEROMETER,
        SensorKind.GYROSCOPE,
    ]
    entries = []
    for sample in samples:
        for kind in required:
            if kind not in sample.traces:
                raise MissingSensor(
                    f"{sample.sample_id}: fixed-length export needs {kind.value}"
                )
        blocks = [
            pad_or_truncate(sample.traces[kind], length).samples for kind in required
        ]
        matrix = np.hstack(blocks)
        rel = Path("fixed") / f"{sample.sample_id}.csv"
        _write_csv(
            root / rel,
            ",".join(FIXED_CHANNELS),
            [matrix[:, k] for k in range(matrix.shape[1])],
        )
        entries.append(
            {
                "sample_id": sample.sample_id,
                "file": str(rel),
                "user_id": sample.user_id,
                "session": sample.session,
                "attempt": sample.attempt,
                "label": sample.label.value,
            }
        )
    manifest = {
        "schema": "airsig-fixed/1",
        "length": length,
        "channels": FIXED_CHANNELS,
        "samples": entries,
    }
    (root / "fixed_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
