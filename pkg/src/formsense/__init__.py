"""Exercise-form diagnosis from pose landmark streams.

Pipeline: rep segmentation by peak prominence, a learnable graph physics
engine predicting per-rep motion rollouts, spectral signatures of the
rollout errors, and a random-forest recommender mapping each rep to a
corrective recommendation.
"""

from .engine import (
    EngineParams,
    GraphBatch,
    InteractionEngine,
    MlpBaseline,
    RolloutError,
    TrainConfig,
    build_graph,
    load_engine,
    make_engine,
)
from .forest import (
    Diagnosis,
    Forest,
    ForestConfig,
    SearchSpace,
    classify,
    load_forest,
    train_forest,
    tune_forest,
    weighted_f1,
)
from .io import open_stream, read_series, write_series
from .model import (
    ClassLabel,
    Exercise,
    ExerciseSpec,
    LandmarkFrame,
    LandmarkId,
    LandmarkSeries,
    RepSegment,
    Violation,
    exercise_preset,
    validate_series,
)
from .preprocess import (
    QualityGate,
    SmoothingConfig,
    estimate_velocity,
    gate_rep,
    lowess_smooth,
    minmax_normalize,
    normalize_facing,
)
from .rig import RigConfig, generate
from .segmentation import Peak, RepBoundaries, find_peaks, online_segmenter, segment_reps
from .signature import ErrorSignature, dtft_at, signature

__version__ = "0.1.0"
