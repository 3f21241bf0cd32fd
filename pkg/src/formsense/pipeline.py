"""End-to-end orchestration: series -> reps -> engine -> signatures -> forest.

Used by both the batch CLI commands and the streaming watcher so that any
completed rep takes exactly the same path (per-rep smoothing, gating,
normalization, rollout, spectral signature, classification).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .engine import EngineParams, TrainConfig, make_engine
from .forest import (
    Diagnosis,
    Forest,
    ForestConfig,
    SearchSpace,
    classify,
    train_forest,
    tune_forest,
    weighted_f1,
)
from .io import read_series
from .model import ExerciseSpec, RepSegment
from .preprocess import (
    GateResult,
    PreprocessedSeries,
    QualityGate,
    SmoothingConfig,
    extract_arrays,
    facing_flip_needed,
    gate_rep,
    minmax_normalize,
    smooth_rep,
)
from .rig import RigOutput, read_truth
from .segmentation import RepBoundaries, segment_reps
from .signature import ErrorSignature, signature, stack_features


@dataclass
class PreparedSeries:
    """Segmentation + per-rep preprocessing results for one series."""

    boundaries: RepBoundaries
    segments: list[RepSegment]          # accepted, normalized trajectories
    rejected: list[tuple[int, int, str]]  # (start, end, reason)
    pre: PreprocessedSeries


def prepare_rep(raw_slice: np.ndarray, visibility: np.ndarray, rep_index: int,
                start: int, end: int, landmarks, smoothing: SmoothingConfig,
                gate: QualityGate) -> tuple[RepSegment | None, GateResult]:
    """Smooth, gate and normalize one raw rep slice."""
    seg = RepSegment(rep_index=rep_index, start_frame=start, end_frame=end,
                     landmarks=tuple(landmarks), trajectories=raw_slice)
    smoothed = smooth_rep(raw_slice, smoothing)
    verdict = gate_rep(seg, visibility, gate, smoothed=smoothed)
    if not verdict.accepted:
        return None, verdict
    normalized = minmax_normalize(replace(seg, trajectories=smoothed))
    return normalized, verdict


def prepare_stream_rep(segmenter, event, spec: ExerciseSpec,
                       smoothing: SmoothingConfig,
                       gate: QualityGate) -> tuple[RepSegment | None, GateResult]:
    """Streaming counterpart of prepare_rep for one emitted rep event.

    Facing is decided from the rep's own frames so that consistently-faced
    streams match the batch path bit-for-bit.
    """
    seg = segmenter.raw_segment(event)
    frames = segmenter.frames[event.start_frame:event.end_frame + 1]
    raw = np.asarray(seg.trajectories, dtype=float)
    if facing_flip_needed(frames, segmenter.frames[0].positions.keys()):
        raw = raw.copy()
        raw[:, :, 0] = 1.0 - raw[:, :, 0]
    vis = np.asarray([[f.visibility.get(lm, 1.0) for f in frames]
                      for lm in spec.landmarks])
    return prepare_rep(raw, vis, event.rep_index, event.start_frame,
                       event.end_frame, spec.landmarks, smoothing, gate)


def prepare_series(series, spec: ExerciseSpec,
                   smoothing: SmoothingConfig = SmoothingConfig(),
                   gate: QualityGate = QualityGate()) -> PreparedSeries:
    """Segment a series and run the per-rep preprocessing on every rep."""
    pre = extract_arrays(series, spec)
    bounds = segment_reps(pre.signal)
    segments: list[RepSegment] = []
    rejected: list[tuple[int, int, str]] = []
    for start, end in bounds.reps:
        raw_slice = pre.raw[:, start:end + 1, :].copy()
        seg, verdict = prepare_rep(raw_slice, pre.visibility[:, start:end + 1],
                                   len(segments), start, end, pre.landmarks,
                                   smoothing, gate)
        if seg is None:
            rejected.append((start, end, verdict.reason))
        else:
            segments.append(seg)
    return PreparedSeries(boundaries=bounds, segments=segments,
                          rejected=rejected, pre=pre)


@dataclass
class LabeledDataset:
    """Accepted reps with video-level labels, ready for training."""

    spec: ExerciseSpec
    segments: list[RepSegment]
    labels: np.ndarray  # class ids, aligned with segments

    def __len__(self) -> int:
        return len(self.segments)


def dataset_from_outputs(outputs: list[RigOutput], spec: ExerciseSpec,
                         smoothing: SmoothingConfig = SmoothingConfig(),
                         gate: QualityGate = QualityGate()) -> LabeledDataset:
    segments: list[RepSegment] = []
    labels: list[int] = []
    for out in outputs:
        prepared = prepare_series(out.series, spec, smoothing, gate)
        for seg in prepared.segments:
            segments.append(replace(seg, rep_index=len(segments), label=out.label))
            labels.append(out.label.id)
    return LabeledDataset(spec=spec, segments=segments,
                          labels=np.asarray(labels, dtype=np.intp))


def dataset_from_dir(data_dir, spec: ExerciseSpec,
                     smoothing: SmoothingConfig = SmoothingConfig(),
                     gate: QualityGate = QualityGate()) -> LabeledDataset:
    """Load every `*.lms` file with its `*.truth.json` sidecar."""
    segments: list[RepSegment] = []
    labels: list[int] = []
    paths = sorted(Path(data_dir).glob("*.lms"))
    if not paths:
        raise FileNotFoundError(f"no .lms files under {data_dir}")
    for path in paths:
        truth_path = path.with_suffix(".truth.json")
        if not truth_path.exists():
            raise FileNotFoundError(f"missing sidecar {truth_path}")
        truth = read_truth(truth_path)
        label = spec.class_by_id(int(truth["label_id"]))
        prepared = prepare_series(read_series(path), spec, smoothing, gate)
        for seg in prepared.segments:
            segments.append(replace(seg, rep_index=len(segments), label=label))
            labels.append(label.id)
    return LabeledDataset(spec=spec, segments=segments,
                          labels=np.asarray(labels, dtype=np.intp))


def stratified_split(labels: np.ndarray, train_fraction: float,
                     rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Per-class shuffled split; every class lands on both sides."""
    train_idx: list[int] = []
    test_idx: list[int] = []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(len(idx))]
        n_train = int(round(train_fraction * len(idx)))
        n_train = min(max(n_train, 1), len(idx) - 1)
        train_idx.extend(idx[:n_train])
        test_idx.extend(idx[n_train:])
    return (np.asarray(sorted(train_idx), dtype=np.intp),
            np.asarray(sorted(test_idx), dtype=np.intp))


def signatures_for(engine, segments: list[RepSegment]) -> list[ErrorSignature]:
    return [signature(engine.rollout(seg)) for seg in segments]


@dataclass
class SplitReport:
    seed: int
    f1: float
    per_class: dict[int, dict[str, float]]
    n_train: int
    n_test: int


@dataclass
class TrainArtifacts:
    engine: object
    forest: Forest
    report: SplitReport
    forest_config: ForestConfig


def _per_class_metrics(pred: np.ndarray, true: np.ndarray) -> dict[int, dict[str, float]]:
    out: dict[int, dict[str, float]] = {}
    for cls in np.unique(true):
        tp = float(np.sum((pred == cls) & (true == cls)))
        fp = float(np.sum((pred == cls) & (true != cls)))
        fn = float(np.sum((pred != cls) & (true == cls)))
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        out[int(cls)] = {"precision": precision, "recall": recall,
                         "support": float(np.sum(true == cls))}
    return out


def train_split(dataset: LabeledDataset, seed: int,
                train_cfg: TrainConfig = TrainConfig(),
                engine_params: EngineParams = EngineParams(),
                variant: str = "in",
                forest_cfg: ForestConfig = ForestConfig(),
                search: SearchSpace | None = None,
                train_fraction: float = 0.6) -> TrainArtifacts:
    """One stratified split: engine on correct training reps, forest on all
    training signatures, weighted F1 on the held-out reps."""
    labels = dataset.labels
    if len(np.unique(labels)) < 2:
        raise ValueError("dataset must contain at least 2 classes")
    correct_id = dataset.spec.correct_class.id
    if correct_id not in labels:
        raise ValueError("dataset lacks correct-class reps (engine training set)")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = stratified_split(labels, train_fraction, rng)

    correct_train = [dataset.segments[i] for i in train_idx
                     if labels[i] == correct_id]
    engine = make_engine(dataset.spec, variant, engine_params)
    engine.fit(correct_train, replace(train_cfg, seed=seed))

    sigs = signatures_for(engine, dataset.segments)
    features = stack_features(sigs)
    if search is not None:
        forest_cfg = tune_forest(features[train_idx], labels[train_idx],
                                 replace(search, seed=seed))
    forest_cfg = replace(forest_cfg, seed=seed)
    forest = train_forest(features[train_idx], labels[train_idx], forest_cfg)
    pred = forest.predict(features[test_idx])
    true = labels[test_idx]
    report = SplitReport(
        seed=seed,
        f1=weighted_f1(pred, true),
        per_class=_per_class_metrics(pred, true),
        n_train=len(train_idx),
        n_test=len(test_idx),
    )
    return TrainArtifacts(engine=engine, forest=forest, report=report,
                          forest_config=forest_cfg)


@dataclass
class EvaluationReport:
    seeds: list[int]
    f1_per_seed: list[float]
    f1_mean: float
    f1_std: float
    first_split: SplitReport

    def to_dict(self) -> dict:
        return {
            "seeds": self.seeds,
            "f1_per_seed": self.f1_per_seed,
            "f1_mean": self.f1_mean,
            "f1_std": self.f1_std,
            "per_class": self.first_split.per_class,
        }


def evaluate_split(dataset: LabeledDataset, seed: int = 0, n_seeds: int = 5,
                   train_cfg: TrainConfig = TrainConfig(),
                   engine_params: EngineParams = EngineParams(),
                   variant: str = "in",
                   forest_cfg: ForestConfig = ForestConfig(),
                   search: SearchSpace | None = None) -> EvaluationReport:
    """Repeated stratified 60/40 evaluation; mean and std of weighted F1."""
    reports = []
    for k in range(n_seeds):
        art = train_split(dataset, seed + k, train_cfg, engine_params, variant,
                          forest_cfg, search)
        reports.append(art.report)
    f1s = [r.f1 for r in reports]
    return EvaluationReport(
        seeds=[r.seed for r in reports],
        f1_per_seed=f1s,
        f1_mean=float(np.mean(f1s)),
        f1_std=float(np.std(f1s)),
        first_split=reports[0],
    )


def diagnose_segment(engine, forest: Forest, spec: ExerciseSpec,
                     segment: RepSegment) -> Diagnosis:
    """Rollout -> signature -> vote, with the compute latency measured."""
    t0 = time.perf_counter()
    sig = signature(engine.rollout(segment))
    diag = classify(forest, sig, spec, rep_index=segment.rep_index)
    diag.latency_ms = (time.perf_counter() - t0) * 1e3
    return diag


def diagnose_series(series, engine, forest: Forest, spec: ExerciseSpec,
                    smoothing: SmoothingConfig = SmoothingConfig(),
                    gate: QualityGate = QualityGate()) -> tuple[list[Diagnosis], PreparedSeries]:
    prepared = prepare_series(series, spec, smoothing, gate)
    diags = [diagnose_segment(engine, forest, spec, seg)
             for seg in prepared.segments]
    return diags, prepared
