import csv

import numpy as np
import pytest

from airsig.dataset import Label
from airsig.errors import (
    DegenerateGeometry,
    DimensionMismatch,
    EmptyScores,
    MissingArtifact,
    MissingEmbedding,
)
from airsig.evaluation import (
    DtwScorer,
    build_protocol,
    compute_eer,
    cosine_distance,
    det_curve,
    procrustes_align,
    run_benchmark,
    score_embeddings,
    split_users,
    write_reports,
)
from airsig.preprocessing import PreprocessConfig, SensorKind, preprocess


def eer_oracle(genuine, impostor):
    """Exhaustive threshold sweep, independent of the vectorized code."""
    thresholds = [-np.inf] + sorted(set(list(genuine) + list(impostor))) + [np.inf]
    best = None
    for t in thresholds:
        far = sum(1 for s in impostor if s <= t) / len(impostor)
        frr = sum(1 for s in genuine if s > t) / len(genuine)
        gap = abs(far - frr)
        if best is None or gap < best[0]:
            best = (gap, (far + frr) / 2.0, t)
    return best[1], best[2]


class TestComputeEer:
    def test_perfectly_separable(self):
        eer, _ = compute_eer([0.1, 0.2], [0.7, 0.8])
        assert eer == 0.0

    def test_crossing_region(self):
        eer, threshold = compute_eer([0.1, 0.6], [0.4, 0.9])
        assert eer == 0.5
        assert threshold == 0.4

    def test_identical_distributions(self):
        scores = [0.2, 0.5, 0.7]
        eer, _ = compute_eer(scores, scores)
        assert eer == 0.5

    def test_matches_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(250):
            genuine = rng.normal(0.3, 0.15, size=rng.integers(1, 40))
            impostor = rng.normal(0.7, 0.15, size=rng.integers(1, 40))
            got = compute_eer(genuine, impostor)
            want = eer_oracle(genuine, impostor)
            assert got[0] == want[0]
            assert got[1] == want[1]

    def test_monotone_under_helpful_impostors(self):
        # monotone up to the FAR discretization quantum: appending a score
        # changes every FAR denominator, which can move the min-gap
        # average by up to half a quantum even for an always-rejected
        # impostor (strict monotonicity only holds for continuous ROCs)
        rng = np.random.default_rng(1)
        for _ in range(200):
            m = int(rng.integers(3, 40))
            genuine = rng.normal(0.4, 0.2, size=int(rng.integers(3, 40)))
            impostor = rng.normal(0.6, 0.2, size=m)
            quantum = 0.5 / (m + 1)
            base, _ = compute_eer(genuine, impostor)
            below, _ = compute_eer(genuine, np.append(impostor, genuine.min() - 1.0))
            above, _ = compute_eer(genuine, np.append(impostor, max(genuine.max(), impostor.max()) + 1.0))
            assert below >= base - quantum - 1e-12
            assert above <= base + quantum + 1e-12

    def test_invariant_to_monotone_transform(self):
        rng = np.random.default_rng(2)
        for transform in (np.exp, lambda x: 2 * x + 1, np.tanh):
            genuine = rng.normal(0.4, 0.2, size=25)
            impostor = rng.normal(0.7, 0.2, size=30)
            base, _ = compute_eer(genuine, impostor)
            mapped, _ = compute_eer(transform(genuine), transform(impostor))
            assert mapped == pytest.approx(base, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(EmptyScores):
            compute_eer([], [0.5])
        with pytest.raises(EmptyScores):
            compute_eer([0.5], [])


class TestDetCurve:
    def test_endpoints_present(self):
        points = det_curve([0.1, 0.3], [0.5, 0.9])
        assert (0.0, 1.0) in points
        assert (1.0, 0.0) in points

    def test_separable_reaches_origin(self):
        points = det_curve([0.1, 0.2], [0.7, 0.8])
        assert (0.0, 0.0) in points

    def test_single_pair_staircase(self):
        points = det_curve([0.3], [0.7])
        assert points == [(0.0, 1.0), (0.0, 0.0), (1.0, 0.0)]

    def test_monotone(self):
        rng = np.random.default_rng(3)
        points = det_curve(rng.normal(0.4, 0.2, 50), rng.normal(0.6, 0.2, 50))
        far = [p[0] for p in points]
        frr = [p[1] for p in points]
        assert all(a <= b + 1e-12 for a, b in zip(far, far[1:]))
        assert all(a >= b - 1e-12 for a, b in zip(frr, frr[1:]))


class TestProtocol:
    def test_enrollment_structure(self, small_population):
        protocol = build_protocol(small_population)
        assert len(protocol.users) == 5
        for user in protocol.users:
            enrollment = protocol.enrollment[user]
            assert len(enrollment) == 4
            assert sorted(s.session for s in enrollment) == [2, 2, 3, 3]
            assert all(p.session == 4 for p in protocol.probes_genuine[user])
            assert all(
                p.label is Label.SKILLED_FORGERY for p in protocol.probes_skilled[user]
            )
            assert all(p.user_id != user for p in protocol.probes_random[user])

    def test_session_one_absent(self, small_population):
        protocol = build_protocol(small_population)
        everything = (
            [s for users in protocol.enrollment.values() for s in users]
            + [s for users in protocol.probes_genuine.values() for s in users]
            + [s for users in protocol.probes_random.values() for s in users]
        )
        assert all(s.session != 1 for s in everything)

    def test_incomplete_user_excluded(self, small_population):
        victim = small_population[0].user_id
        reduced = [
            s
            for s in small_population
            if not (s.user_id == victim and s.session == 4 and s.label is Label.GENUINE)
        ]
        protocol = build_protocol(reduced)
        assert victim not in protocol.enrollment
        assert len(protocol.users) == 4
        assert protocol.excluded and protocol.excluded[0][0] == victim

    def test_enrollment_probe_disjoint(self, small_population):
        protocol = build_protocol(small_population)
        for user in protocol.users:
            enrolled = {s.sample_id for s in protocol.enrollment[user]}
            probes = {s.sample_id for s in protocol.probes_genuine[user]}
            assert not (enrolled & probes)


def write_embeddings(path, vectors):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        dim = len(next(iter(vectors.values())))
        writer.writerow(["sample_id"] + [f"e{i}" for i in range(dim)])
        for sid, vec in vectors.items():
            writer.writerow([sid] + [repr(float(v)) for v in vec])


class TestEmbeddings:
    def test_cosine_basics(self):
        assert cosine_distance(np.array([1.0, 0]), np.array([1.0, 0])) == pytest.approx(0)
        assert cosine_distance(np.array([1.0, 0]), np.array([0, 1.0])) == pytest.approx(1)
        assert cosine_distance(np.array([1.0, 0]), np.array([-1.0, 0])) == pytest.approx(2)

    def test_scoring_and_scale_invariance(self, small_population, tmp_path):
        protocol = build_protocol(small_population)
        rng = np.random.default_rng(5)
        per_user = {u: rng.normal(size=8) for u in protocol.users}
        vectors = {}
        for s in small_population:
            base = per_user[s.user_id] + 0.1 * rng.normal(size=8)
            if s.label is Label.SKILLED_FORGERY:
                base = base + rng.normal(size=8)
            vectors[s.sample_id] = base
        path = tmp_path / "emb.csv"
        write_embeddings(path, vectors)
        genuine, impostor = score_embeddings(path, protocol, "4vs1", "random")
        assert np.mean(genuine) < np.mean(impostor)
        # per-vector positive rescaling leaves scores unchanged
        scaled = {k: v * np.random.default_rng(hash(k) % 2**31).uniform(0.5, 3.0) for k, v in vectors.items()}
        path2 = tmp_path / "emb2.csv"
        write_embeddings(path2, scaled)
        genuine2, _ = score_embeddings(path2, protocol, "4vs1", "random")
        assert np.allclose(genuine, genuine2, atol=1e-9)

    def test_missing_embedding(self, small_population, tmp_path):
        protocol = build_protocol(small_population)
        vectors = {small_population[0].sample_id: np.ones(4)}
        path = tmp_path / "emb.csv"
        write_embeddings(path, vectors)
        with pytest.raises(MissingEmbedding):
            score_embeddings(path, protocol, "4vs1", "random")

    def test_dimension_mismatch(self, tmp_path):
        path = tmp_path / "emb.csv"
        path.write_text("sample_id,e0,e1\na,1.0,2.0\nb,1.0,2.0,3.0\n")
        from airsig.evaluation import load_embeddings

        with pytest.raises(DimensionMismatch):
            load_embeddings(path)


@pytest.fixture(scope="module")
def processed(small_population):
    cfg = PreprocessConfig()
    return [preprocess(s, cfg, profile="verify") for s in small_population]


class TestRunBenchmark:

    def test_empty_matrix(self, processed):
        assert run_benchmark(processed, []) == []

    def test_dtw_cell_and_low_confidence(self, processed):
        reports = run_benchmark(
            processed,
            [{"sensors": ["linear_accelerometer"], "mode": "4vs1", "impostor": "skilled"}],
        )
        report = reports[0]
        assert 0.0 <= report.eer <= 0.5
        assert len(report.genuine_scores) == 10  # 5 users x 2 probes
        assert len(report.impostor_scores) == 10  # 5 users x 2 forgeries
        assert report.low_confidence is False

    def test_unknown_scorer(self, processed):
        with pytest.raises(ValueError):
            run_benchmark(processed, [{"sensors": ["acc"], "mode": "4vs1", "impostor": "random", "scorer": "sorcery"}])

    def test_embedding_cell_requires_file(self, processed):
        with pytest.raises(MissingArtifact):
            run_benchmark(
                processed,
                [{"sensors": ["acc"], "mode": "4vs1", "impostor": "random", "scorer": "embedding"}],
            )

    def test_four_vs_one_reduces_variance_not_mean(self, processed):
        protocol = build_protocol(processed)
        scorer = DtwScorer()
        sensors = [SensorKind.LINEAR_ACCELEROMETER]
        one, four = [], []
        for user in protocol.users:
            enrollment = protocol.enrollment[user]
            for probe in protocol.probes_genuine[user]:
                four.append(scorer.verify(enrollment, probe, sensors))
                for ref in enrollment:
                    one.append(scorer.pair(probe, ref, sensors))
        # averaging the same pair scores: identical mean, smaller spread
        assert np.mean(four) == pytest.approx(np.mean(one), abs=1e-12)
        assert np.var(four) < np.var(one)

    def test_reports_written(self, processed, tmp_path):
        reports = run_benchmark(
            processed,
            [{"sensors": ["linear_accelerometer", "gyroscope"], "mode": "1vs1", "impostor": "random"}],
        )
        payload = write_reports(reports, tmp_path)
        assert (tmp_path / "reports.json").is_file()
        entry = payload["reports"][0]
        scores_file = tmp_path / entry["scores_file"]
        det_file = tmp_path / entry["det_file"]
        assert scores_file.is_file() and det_file.is_file()
        rows = scores_file.read_text().splitlines()
        assert rows[0] == (
            "kind,probe_id,reference_ids,sensor_set,"
            "score_gyroscope,score_linear_accelerometer,score"
        )
        assert len(rows) == 1 + entry["n_genuine"] + entry["n_impostor"]
        first = rows[1].split(",")
        assert first[0] in ("genuine", "impostor")
        assert first[1]  # probe id present
        assert first[3] == "gyroscope+linear_accelerometer"
        # per-sensor scores fuse to the recorded score
        fused = (float(first[4]) + float(first[5])) / 2
        assert fused == pytest.approx(float(first[6]), abs=1e-12)


class TestSplitUsers:
    def test_deterministic_and_disjoint(self):
        ids = [f"u{i}" for i in range(10)]
        a = split_users(ids, 0.8, seed=3)
        b = split_users(ids, 0.8, seed=3)
        assert a == b
        assert len(a["train"]) == 8
        assert len(a["test"]) == 2
        assert not (set(a["train"]) & set(a["test"]))

    def test_seed_changes_split(self):
        ids = [f"u{i}" for i in range(10)]
        assert split_users(ids, 0.8, seed=1) != split_users(ids, 0.8, seed=2)


class TestProcrustes:
    def test_similarity_recovered(self):
        rng = np.random.default_rng(0)
        ref = rng.normal(size=(60, 2)).cumsum(axis=0)
        angle = np.radians(37.0)
        rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        moved = 2.0 * ref @ rot.T + np.array([5.0, -3.0])
        _, residual = procrustes_align(moved, ref)
        assert residual < 1e-9

    def test_reflection_allowed(self):
        rng = np.random.default_rng(1)
        ref = rng.normal(size=(60, 2)).cumsum(axis=0)
        mirrored = ref * np.array([-1.0, 1.0])
        _, residual = procrustes_align(mirrored, ref)
        assert residual < 1e-9

    def test_random_walks_do_not_align(self):
        rng = np.random.default_rng(2)
        residuals = []
        for _ in range(10):
            a = rng.normal(size=(80, 2)).cumsum(axis=0)
            b = rng.normal(size=(80, 2)).cumsum(axis=0)
            _, res = procrustes_align(a, b)
            residuals.append(res)
        assert min(residuals) > 0.05
        assert np.median(residuals) > 0.2

    def test_degenerate_reference(self):
        line = np.column_stack([np.linspace(0, 1, 30), np.linspace(0, 2, 30)])
        cloud = np.random.default_rng(3).normal(size=(30, 2))
        with pytest.raises(DegenerateGeometry):
            procrustes_align(cloud, line)
