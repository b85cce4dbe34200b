"""Verification benchmark: protocol split, EER/DET, embedding scoring.

Protocol: session 1 is dropped (unreliable first-contact recordings),
sessions 2-3 enroll (two attempts each, four references), session 4
provides genuine probes.  Random impostor probes are the session-4
genuine samples of every other retained user; skilled probes are the
user's labeled forgeries.  All scorers share the lower-is-genuine
convention, so EER code never special-cases the scorer.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dtw as dtw_mod
from .dataset import Label
from .errors import (
    DegenerateGeometry,
    DimensionMismatch,
    EmptyScores,
    MissingArtifact,
    MissingEmbedding,
)
from .preprocessing import SensorKind

log = logging.getLogger(__name__)

LOW_CONFIDENCE_SCORES = 10


@dataclass
class ProtocolSplit:
    """Per-user enrollment and probe sets; session 1 never appears."""

    enrollment: dict
    probes_genuine: dict
    probes_skilled: dict
    probes_random: dict
    excluded: list = field(default_factory=list)

    @property
    def users(self) -> list:
        return sorted(self.enrollment)


@dataclass
class EvalReport:
    """EER/DET result of one benchmark cell, with full score lists."""

    sensors: list
    mode: str
    impostor: str
    scorer: str
    eer: float
    eer_threshold: float
    det_points: list
    genuine_scores: list
    impostor_scores: list
    low_confidence: bool = False
    # one entry per trial: probe_id, reference_ids, per-sensor scores, fused score
    pair_rows: list = field(default_factory=list)

    def descriptor(self) -> str:
        sensor_tag = "+".join(s.value for s in self.sensors)
        return f"{self.scorer}_{sensor_tag}_{self.mode}_{self.impostor}"

    def to_dict(self) -> dict:
        return {
            "sensors": [s.value for s in self.sensors],
            "mode": self.mode,
            "impostor": self.impostor,
            "scorer": self.scorer,
            "eer": self.eer,
            "eer_threshold": self.eer_threshold,
            "n_genuine": len(self.genuine_scores),
            "n_impostor": len(self.impostor_scores),
            "low_confidence": self.low_confidence,
        }


def build_protocol(dataset, users=None) -> ProtocolSplit:
    """Deterministic enrollment/probe split over a loaded dataset.

    Users lacking two genuine samples in each of sessions 2 and 3, or a
    genuine session-4 probe, are excluded with a logged reason.
    """
    by_user: dict = {}
    for sample in dataset:
        if users is not None and sample.user_id not in users:
            continue
        by_user.setdefault(sample.user_id, []).append(sample)

    enrollment, genuine, skilled = {}, {}, {}
    excluded = []
    for user in sorted(by_user):
        rows = sorted(
            by_user[user], key=lambda s: (s.session, s.attempt, s.sample_id)
        )
        gen = [s for s in rows if s.label is Label.GENUINE]
        s2 = [s for s in gen if s.session == 2]
        s3 = [s for s in gen if s.session == 3]
        s4 = [s for s in gen if s.session == 4]
        if len(s2) < 2 or len(s3) < 2 or len(s4) < 1:
            reason = (
                f"needs >=2 genuine in sessions 2 and 3 and >=1 in session 4, "
                f"has {len(s2)}/{len(s3)}/{len(s4)}"
            )
            excluded.append((user, reason))
            log.info("excluding user %s: %s", user, reason)
            continue
        enrollment[user] = s2[:2] + s3[:2]
        genuine[user] = s4
        skilled[user] = [s for s in rows if s.label is Label.SKILLED_FORGERY]

    random_probes = {
        user: [p for other in enrollment if other != user for p in genuine[other]]
        for user in enrollment
    }
    return ProtocolSplit(
        enrollment=enrollment,
        probes_genuine=genuine,
        probes_skilled=skilled,
        probes_random=random_probes,
        excluded=excluded,
    )


def _validate_scores(scores) -> np.ndarray:
    arr = np.asarray(list(scores), dtype=np.float64)
    if arr.size == 0:
        raise EmptyScores("score list is empty")
    return arr


def _sweep(genuine: np.ndarray, impostor: np.ndarray):
    """FAR/FRR at every distinct score threshold plus the +/-inf sentinels."""
    thresholds = np.concatenate(
        [[-np.inf], np.unique(np.concatenate([genuine, impostor])), [np.inf]]
    )
    gen_sorted = np.sort(genuine)
    imp_sorted = np.sort(impostor)
    far = np.searchsorted(imp_sorted, thresholds, side="right") / len(imp_sorted)
    frr = (
        len(gen_sorted) - np.searchsorted(gen_sorted, thresholds, side="right")
    ) / len(gen_sorted)
    return thresholds, far, frr


def compute_eer(genuine, impostor):
    """Equal error rate under the lower-is-genuine convention.

    FAR(t) = fraction of impostor scores <= t, FRR(t) = fraction of
    genuine scores > t.  Returns (FAR + FRR) / 2 at the threshold
    minimizing |FAR - FRR| (ties broken by the lower threshold), plus
    that threshold.
    """
    genuine = _validate_scores(genuine)
    impostor = _validate_scores(impostor)
    thresholds, far, frr = _sweep(genuine, impostor)
    idx = int(np.argmin(np.abs(far - frr)))  # first minimum = lowest threshold
    eer = (far[idx] + frr[idx]) / 2.0
    return float(eer), float(thresholds[idx])


def det_curve(genuine, impostor) -> list:
    """(FAR, FRR) staircase over all thresholds, endpoints included."""
    genuine = _validate_scores(genuine)
    impostor = _validate_scores(impostor)
    _, far, frr = _sweep(genuine, impostor)
    points = []
    for fa, fr in zip(far, frr):
        pt = (float(fa), float(fr))
        if not points or points[-1] != pt:
            points.append(pt)
    return points


class DtwScorer:
    """DTW pair scoring with a cross-cell cache (pairs repeat across cells)."""

    def __init__(self, window=None, per_axis=False, weights=None):
        self.window = window
        self.per_axis = per_axis
        self.weights = weights
        self._cache: dict = {}

    def pair_detail(self, probe, reference, sensors) -> dict:
        """Per-sensor scores for one pair, cached by sample ids."""
        key = (probe.sample_id, reference.sample_id, tuple(s.value for s in sensors))
        if key not in self._cache:
            result = dtw_mod.score_pair(
                probe, reference, sensors,
                weights=self.weights, window=self.window, per_axis=self.per_axis,
            )
            self._cache[key] = result.per_sensor
        return self._cache[key]

    def pair(self, probe, reference, sensors) -> float:
        per_sensor = self.pair_detail(probe, reference, sensors)
        return self._fuse(per_sensor, sensors)

    def _fuse(self, per_sensor, sensors) -> float:
        if self.weights:
            w = np.array([self.weights.get(k, 1.0) for k in sensors], dtype=float)
            return float(np.dot(w, [per_sensor[k] for k in sensors]) / w.sum())
        return float(np.mean([per_sensor[k] for k in sensors]))

    def verify_detail(self, enrollment, probe, sensors):
        """(fused score, per-sensor means) over an enrollment set."""
        details = [self.pair_detail(probe, ref, sensors) for ref in enrollment]
        per_sensor = {
            kind: float(np.mean([d[kind] for d in details])) for kind in sensors
        }
        return self._fuse(per_sensor, sensors), per_sensor

    def verify(self, enrollment, probe, sensors) -> float:
        return self.verify_detail(enrollment, probe, sensors)[0]


def load_embeddings(path) -> dict:
    """Read the embedding exchange CSV: sample_id, e0..e{D-1}."""
    path = Path(path)
    if not path.is_file():
        raise MissingArtifact(f"embedding file not found: {path}")
    vectors = {}
    dim = None
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "sample_id":
            raise DimensionMismatch(f"{path}: expected header sample_id,e0,...")
        for row in reader:
            if not row:
                continue
            vec = np.array([float(v) for v in row[1:]], dtype=np.float64)
            if dim is None:
                dim = len(vec)
                if dim == 0:
                    raise DimensionMismatch(f"{path}: zero-dimensional embedding")
            elif len(vec) != dim:
                raise DimensionMismatch(
                    f"{path}: row {row[0]} has dimension {len(vec)}, expected {dim}"
                )
            vectors[row[0]] = vec
    return vectors


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu < 1e-12 or nv < 1e-12:
        raise ValueError("cosine distance undefined for zero vectors")
    return float(1.0 - np.dot(u, v) / (nu * nv))


def score_embeddings(embeddings, protocol: ProtocolSplit, mode: str, impostor: str):
    """Cosine-distance scoring of externally produced embeddings.

    `embeddings` is a path or a preloaded {sample_id: vector} map.
    Returns (genuine_scores, impostor_scores) under the protocol's
    pairing for the given mode (1vs1 / 4vs1) and impostor kind.
    """
    if not isinstance(embeddings, dict):
        embeddings = load_embeddings(embeddings)

    def vec(sample):
        if sample.sample_id not in embeddings:
            raise MissingEmbedding(f"no embedding for sample {sample.sample_id}")
        return embeddings[sample.sample_id]

    def score(enrollment, probe):
        dists = [cosine_distance(vec(probe), vec(ref)) for ref in enrollment]
        return float(np.mean(dists))

    return _collect_scores(protocol, mode, impostor, score)


def _impostor_probes(protocol: ProtocolSplit, impostor: str, user: str):
    if impostor == "random":
        return protocol.probes_random[user]
    if impostor == "skilled":
        return protocol.probes_skilled[user]
    raise ValueError(f"unknown impostor kind {impostor!r}")


def _collect_scores(protocol: ProtocolSplit, mode: str, impostor: str, score):
    """Walk the protocol pairing; `score(enrollment_list, probe)` does the work."""
    rows = _collect_rows(
        protocol, mode, impostor, lambda refs, probe: (score(refs, probe), {})
    )
    genuine = [r["score"] for r in rows if r["kind"] == "genuine"]
    impostors = [r["score"] for r in rows if r["kind"] == "impostor"]
    return genuine, impostors


def _collect_rows(protocol: ProtocolSplit, mode: str, impostor: str, score):
    """Per-trial score rows; `score(enrollment_list, probe)` returns
    (fused value, per-sensor map)."""
    if mode not in ("1vs1", "4vs1"):
        raise ValueError(f"unknown mode {mode!r}")
    rows = []

    def add(kind, ref_set, probe):
        value, per_sensor = score(ref_set, probe)
        rows.append(
            {
                "kind": kind,
                "probe_id": probe.sample_id,
                "reference_ids": [r.sample_id for r in ref_set],
                "per_sensor": per_sensor,
                "score": value,
            }
        )

    for user in protocol.users:
        enrollment = protocol.enrollment[user]
        refs = [[e] for e in enrollment] if mode == "1vs1" else [enrollment]
        for ref_set in refs:
            for probe in protocol.probes_genuine[user]:
                add("genuine", ref_set, probe)
            for probe in _impostor_probes(protocol, impostor, user):
                add("impostor", ref_set, probe)
    return rows


def run_benchmark(
    dataset,
    matrix,
    embeddings=None,
    dtw_scorer: DtwScorer | None = None,
    users=None,
) -> list:
    """Evaluate every cell of a benchmark matrix.

    Each cell is a dict {sensors, mode, impostor, scorer}; scorer is
    "dtw" or "embedding" (the latter requires `embeddings`).  The
    dataset must already be preprocessed for DTW cells.
    """
    protocol = build_protocol(dataset, users=users)
    scorer = dtw_scorer or DtwScorer()
    reports = []
    for cell in matrix:
        sensors = sorted(
            {
                s if isinstance(s, SensorKind) else SensorKind.from_alias(s)
                for s in cell["sensors"]
            },
            key=lambda k: k.value,
        )
        mode = cell["mode"]
        impostor = cell["impostor"]
        kind = cell.get("scorer", "dtw")
        if kind == "dtw":
            rows = _collect_rows(
                protocol, mode, impostor,
                lambda refs, probe: scorer.verify_detail(refs, probe, sensors),
            )
        elif kind == "embedding":
            if embeddings is None:
                raise MissingArtifact("embedding scorer requested without a file")
            vectors = (
                embeddings if isinstance(embeddings, dict) else load_embeddings(embeddings)
            )

            def emb_score(refs, probe):
                value = float(
                    np.mean([
                        cosine_distance(_embedding_of(vectors, probe), _embedding_of(vectors, ref))
                        for ref in refs
                    ])
                )
                return value, {}

            rows = _collect_rows(protocol, mode, impostor, emb_score)
        else:
            raise ValueError(f"unknown scorer {kind!r}")
        genuine = [r["score"] for r in rows if r["kind"] == "genuine"]
        impostors = [r["score"] for r in rows if r["kind"] == "impostor"]
        eer, threshold = compute_eer(genuine, impostors)
        reports.append(
            EvalReport(
                sensors=sensors,
                mode=mode,
                impostor=impostor,
                scorer=kind,
                eer=eer,
                eer_threshold=threshold,
                det_points=det_curve(genuine, impostors),
                genuine_scores=genuine,
                impostor_scores=impostors,
                low_confidence=(
                    len(genuine) < LOW_CONFIDENCE_SCORES
                    or len(impostors) < LOW_CONFIDENCE_SCORES
                ),
                pair_rows=rows,
            )
        )
    return reports


def _embedding_of(vectors: dict, sample):
    if sample.sample_id not in vectors:
        raise MissingEmbedding(f"no embedding for sample {sample.sample_id}")
    return vectors[sample.sample_id]


def split_users(user_ids, train_fraction: float = 0.8, seed: int = 0) -> dict:
    """Seeded train/test partition of users, shared with the neural branch."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    ids = sorted(str(u) for u in user_ids)
    perm = np.random.default_rng(seed).permutation(len(ids))
    n_train = int(round(train_fraction * len(ids)))
    train = sorted(ids[i] for i in perm[:n_train])
    test = sorted(ids[i] for i in perm[n_train:])
    return {"seed": seed, "train_fraction": train_fraction, "train": train, "test": test}


def write_reports(reports, out_dir) -> dict:
    """Serialize reports: summary JSON + per-cell score and DET CSVs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = []
    for report in reports:
        tag = report.descriptor()
        sensor_tag = "+".join(s.value for s in report.sensors)
        scores_path = out / f"{tag}.scores.csv"
        with scores_path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            sensor_cols = [f"score_{s.value}" for s in report.sensors]
            writer.writerow(
                ["kind", "probe_id", "reference_ids", "sensor_set"] + sensor_cols + ["score"]
            )
            rows = report.pair_rows or [
                {"kind": kind, "probe_id": "", "reference_ids": [], "per_sensor": {}, "score": s}
                for kind, scores in (
                    ("genuine", report.genuine_scores),
                    ("impostor", report.impostor_scores),
                )
                for s in scores
            ]
            for row in rows:
                per_sensor = [
                    repr(float(row["per_sensor"][s])) if s in row["per_sensor"] else ""
                    for s in report.sensors
                ]
                writer.writerow(
                    [
                        row["kind"],
                        row["probe_id"],
                        "|".join(row["reference_ids"]),
                        sensor_tag,
                    ]
                    + per_sensor
                    + [repr(float(row["score"]))]
                )
        det_path = out / f"{tag}.det.csv"
        with det_path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["far", "frr"])
            for fa, fr in report.det_points:
                writer.writerow([repr(float(fa)), repr(float(fr))])
        entry = report.to_dict()
        entry["scores_file"] = scores_path.name
        entry["det_file"] = det_path.name
        summary.append(entry)
    report_path = out / "reports.json"
    payload = {"reports": summary}
    report_path.write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return payload


def procrustes_align(reconstruction, reference, n_points: int = 200):
    """Optimal similarity alignment of a 2D reconstruction onto a reference.

    Both polylines are resampled to a common length, then rotation,
    reflection, isotropic scale, and translation minimizing RMSE are
    applied to the reconstruction.  Returns (aligned series, residual
    RMSE normalized by the reference's RMS spread about its centroid).
    """
    a = _resample_polyline(np.asarray(reconstruction, dtype=float), n_points)
    b = _resample_polyline(np.asarray(reference, dtype=float), n_points)
    a0 = a - a.mean(axis=0)
    b0 = b - b.mean(axis=0)
    norm_a = np.linalg.norm(a0)
    svals_b = np.linalg.svd(b0, compute_uv=False)
    if norm_a < 1e-12:
        raise DegenerateGeometry("reconstruction has no spread")
    if svals_b[0] < 1e-12 or svals_b[1] < 1e-9 * svals_b[0]:
        raise DegenerateGeometry("reference polyline is degenerate")
    u, s, vt = np.linalg.svd(a0.T @ b0)
    rot = u @ vt  # reflection allowed: no det(+1) correction
    scale = s.sum() / (norm_a**2)
    aligned = scale * a0 @ rot + b.mean(axis=0)
    spread = float(np.sqrt(np.mean(np.sum(b0**2, axis=1))))
    residual = float(np.sqrt(np.mean(np.sum((aligned - b) ** 2, axis=1))) / spread)
    return aligned, residual


def _resample_polyline(points: np.ndarray, n_points: int) -> np.ndarray:
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError("polyline must have shape (N, 2)")
    if len(points) < 3:
        raise DegenerateGeometry("polyline needs at least 3 points")
    src = np.linspace(0.0, 1.0, len(points))
    dst = np.linspace(0.0, 1.0, n_points)
    return np.column_stack(
        [np.interp(dst, src, points[:, 0]), np.interp(dst, src, points[:, 1])]
    )
