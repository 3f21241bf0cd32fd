import numpy as np
import pytest

from formsense.engine import EngineParams, TrainConfig
from formsense.forest import ForestConfig
from formsense.model import Exercise, exercise_preset
from formsense.pipeline import (
    LabeledDataset,
    dataset_from_dir,
    dataset_from_outputs,
    diagnose_series,
    evaluate_split,
    prepare_series,
    prepare_stream_rep,
    stratified_split,
    train_split,
)
from formsense.preprocess import QualityGate, SmoothingConfig
from formsense.rig import RigConfig, generate, generate_dataset, generate_files
from formsense.segmentation import OnlineSegmenter

SM = SmoothingConfig(0.25, 2)
GATE = QualityGate()
TINY_ENGINE = EngineParams(relation_hidden=(16, 16, 16),
                           object_hidden=(16, 16, 16, 16),
                           effect_dim=8, dropout=0.2)
FAST_TRAIN = TrainConfig(max_epochs=25, patience=25, batch_size=64)


@pytest.fixture(scope="module")
def squat_dataset():
    outs = generate_dataset(Exercise.SQUATS, [0, 1], reps_per_class=10,
                            seed=7, reps_per_session=5)
    return dataset_from_outputs(outs, exercise_preset(Exercise.SQUATS), SM, GATE)


def test_prepare_series_recovers_rig_reps(squats_spec):
    out = generate(RigConfig(exercise=Exercise.SQUATS, reps=8, seed=3))
    prepared = prepare_series(out.series, squats_spec, SM, GATE)
    assert len(prepared.segments) == 8
    assert prepared.rejected == []
    for seg, (ts, te) in zip(prepared.segments, out.boundaries):
        assert abs(seg.start_frame - ts) <= 2
        assert abs(seg.end_frame - te) <= 2
        traj = np.asarray(seg.trajectories)
        assert traj.min() >= 0.0 and traj.max() <= 1.0


def test_stream_reps_match_batch_reps(squats_spec):
    out = generate(RigConfig(exercise=Exercise.SQUATS, reps=6, seed=11))
    batch = prepare_series(out.series, squats_spec, SM, GATE)

    segmenter = OnlineSegmenter(squats_spec, out.series.frame_rate)
    events = []
    for frame in out.series.frames:
        events.extend(segmenter.push(frame))
    events.extend(segmenter.finalize())
    assert len(events) == len(batch.segments)

    for event, ref in zip(events, batch.segments):
        seg, verdict = prepare_stream_rep(segmenter, event, squats_spec, SM, GATE)
        assert verdict.accepted
        assert abs(event.start_frame - ref.start_frame) <= 2
        assert abs(event.end_frame - ref.end_frame) <= 2
        if (event.start_frame, event.end_frame) == (ref.start_frame, ref.end_frame):
            assert np.allclose(seg.trajectories, ref.trajectories, atol=1e-12)


def test_dataset_from_dir_round_trip(tmp_path, squats_spec):
    for i, (fault, sev) in enumerate([(None, 0.0), (1, 0.6)]):
        cfg = RigConfig(exercise=Exercise.SQUATS, reps=4, seed=20 + i,
                        fault_mode=fault, fault_severity=sev)
        generate_files(cfg, tmp_path / f"s{i}.lms", tmp_path / f"s{i}.truth.json")
    data = dataset_from_dir(tmp_path, squats_spec, SM, GATE)
    assert len(data) == 8
    assert sorted(set(data.labels.tolist())) == [0, 1]
    with pytest.raises(FileNotFoundError):
        dataset_from_dir(tmp_path / "missing", squats_spec)


def test_stratified_split_properties():
    labels = np.array([0] * 10 + [1] * 20 + [3] * 5)
    rng = np.random.default_rng(0)
    train, test = stratified_split(labels, 0.6, rng)
    assert len(set(train) & set(test)) == 0
    assert len(train) + len(test) == len(labels)
    assert np.sum(labels[train] == 0) == 6
    assert np.sum(labels[train] == 1) == 12
    assert np.sum(labels[train] == 3) == 3
    # both sides see every class
    for cls in (0, 1, 3):
        assert cls in labels[train] and cls in labels[test]


def test_train_split_smoke_and_determinism(squat_dataset):
    a = train_split(squat_dataset, seed=5, train_cfg=FAST_TRAIN,
                    engine_params=TINY_ENGINE,
                    forest_cfg=ForestConfig(n_trees=30))
    b = train_split(squat_dataset, seed=5, train_cfg=FAST_TRAIN,
                    engine_params=TINY_ENGINE,
                    forest_cfg=ForestConfig(n_trees=30))
    assert 0.0 <= a.report.f1 <= 1.0
    assert a.report.f1 == b.report.f1
    assert a.report.per_class == b.report.per_class
    assert a.report.n_train + a.report.n_test == len(squat_dataset)


def test_train_split_requires_correct_class(squat_dataset, squats_spec):
    only_faults = LabeledDataset(
        spec=squats_spec,
        segments=[s for s, l in zip(squat_dataset.segments, squat_dataset.labels)
                  if l == 1],
        labels=np.asarray([l for l in squat_dataset.labels if l == 1]))
    with pytest.raises(ValueError):
        train_split(only_faults, seed=0, train_cfg=FAST_TRAIN,
                    engine_params=TINY_ENGINE)


def test_evaluate_split_aggregates(squat_dataset):
    ev = evaluate_split(squat_dataset, seed=1, n_seeds=2, train_cfg=FAST_TRAIN,
                        engine_params=TINY_ENGINE,
                        forest_cfg=ForestConfig(n_trees=25))
    assert len(ev.f1_per_seed) == 2
    assert ev.f1_mean == pytest.approx(np.mean(ev.f1_per_seed))
    assert ev.f1_std == pytest.approx(np.std(ev.f1_per_seed))
    assert ev.seeds == [1, 2]


def test_diagnose_series_structure(squat_dataset, squats_spec):
    art = train_split(squat_dataset, seed=2, train_cfg=FAST_TRAIN,
                      engine_params=TINY_ENGINE,
                      forest_cfg=ForestConfig(n_trees=20))
    out = generate(RigConfig(exercise=Exercise.SQUATS, reps=4, seed=77))
    diags, prepared = diagnose_series(out.series, art.engine, art.forest,
                                      squats_spec, SM, GATE)
    assert len(diags) == 4
    for i, diag in enumerate(diags):
        assert diag.rep_index == i
        assert sum(diag.probabilities.values()) == pytest.approx(1.0, abs=1e-9)
        assert diag.latency_ms > 0.0
        assert (diag.recommendation == "") == (diag.label.kind == "correct")
