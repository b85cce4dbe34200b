"""In-air signature verification and trajectory reconstruction toolkit."""

__version__ = "0.1.0"

from .dataset import GroundTruth, Label, SignatureSample, load_dataset, save_dataset
from .dtw import DtwResult, MatchScore, dtw_distance, dtw_score, score_pair, verify
from .evaluation import (
    EvalReport,
    ProtocolSplit,
    build_protocol,
    compute_eer,
    det_curve,
    procrustes_align,
    run_benchmark,
    score_embeddings,
    split_users,
)
from .preprocessing import (
    PreprocessConfig,
    SegmentBounds,
    SensorKind,
    SensorTrace,
    detect_movement,
    moving_average,
    pad_or_truncate,
    preprocess,
    resample,
    zscore_normalize,
)
from .synth import (
    NoiseModel,
    OrientationProfile,
    SynthUserTemplate,
    generate_forgery,
    generate_population,
    generate_sample,
    make_user_template,
)
from .trajectory import (
    OrientationSeries,
    Quaternion,
    ReconstructConfig,
    Trajectory3D,
    estimate_orientation,
    highpass,
    integrate_gyro,
    integrate_motion,
    madgwick_update,
    project_to_plane,
    q_multiply,
    q_rotate,
    reconstruct,
    select_cutoff,
    to_global_accel,
)
