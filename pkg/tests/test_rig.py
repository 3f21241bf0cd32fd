import numpy as np
import pytest

from formsense.model import ConfigError, Exercise, LandmarkId, exercise_preset, validate_series
from formsense.preprocess import extract_arrays
from formsense.rig import (
    RigConfig,
    SQUAT_GEOMETRY,
    generate,
    generate_dataset,
    generate_files,
    read_truth,
    squat_knee_margin,
)
from formsense.segmentation import segment_reps

L = LandmarkId


def test_noiseless_boundaries_are_exact():
    cfg = RigConfig(exercise=Exercise.SQUATS, reps=5, frames_per_rep=40,
                    noise_std=0.0, seed=0)
    out = generate(cfg)
    assert out.boundaries == [(k * 40, (k + 1) * 40) for k in range(5)]
    assert len(out.series) == 5 * 40 + 1
    assert out.label.kind == "correct"


def test_severity_zero_requires_no_fault():
    with pytest.raises(ConfigError):
        RigConfig(fault_mode=1, fault_severity=0.0)
    with pytest.raises(ConfigError):
        RigConfig(fault_mode=None, fault_severity=0.3)


def test_unknown_fault_mode_rejected():
    with pytest.raises(ConfigError):
        generate(RigConfig(exercise=Exercise.SITUPS, fault_mode=3,
                           fault_severity=0.5))


def test_determinism_byte_identical(tmp_path):
    cfg = RigConfig(exercise=Exercise.SQUATS, reps=3, frames_per_rep=30, seed=9)
    p1, t1 = tmp_path / "a.lms", tmp_path / "a.truth.json"
    p2, t2 = tmp_path / "b.lms", tmp_path / "b.truth.json"
    generate_files(cfg, p1, t1)
    generate_files(cfg, p2, t2)
    assert p1.read_bytes() == p2.read_bytes()
    assert t1.read_bytes() == t2.read_bytes()
    truth = read_truth(t1)
    assert truth["label_id"] == 0
    assert truth["boundaries"][0] == [0, 30]


def test_fault_and_correct_share_noise_stream():
    base = generate(RigConfig(exercise=Exercise.SQUATS, reps=2, seed=4))
    fault = generate(RigConfig(exercise=Exercise.SQUATS, reps=2, seed=4,
                               fault_mode=1, fault_severity=0.5))
    lm = L.NOSE  # untouched by fault 1
    for f0, f1 in zip(base.series.frames, fault.series.frames):
        assert f0.positions[lm] == pytest.approx(f1.positions[lm], abs=1e-12)
    moved = [abs(f1.positions[L.LEFT_KNEE][0] - f0.positions[L.LEFT_KNEE][0])
             for f0, f1 in zip(base.series.frames, fault.series.frames)]
    assert max(moved) > 0.01


def test_knees_past_toes_margin_matches_closed_form():
    severity = 0.5
    cfg = RigConfig(exercise=Exercise.SQUATS, reps=4, frames_per_rep=40,
                    noise_std=0.0, rep_amplitude_jitter=0.0, body_jitter=0.0,
                    seed=0, fault_mode=1, fault_severity=severity)
    out = generate(cfg)
    g = SQUAT_GEOMETRY
    toe_line = (g["mid_x"] - g["hip_halfwidth"]) + g["toe_margin"]
    knee_x = max(f.positions[L.LEFT_KNEE][0] for f in out.series.frames)
    margin = knee_x - toe_line
    assert margin == pytest.approx(squat_knee_margin(severity), abs=1e-9)
    assert margin > 0
    # the correct template stays behind the toe line
    correct = generate(RigConfig(exercise=Exercise.SQUATS, reps=4,
                                 frames_per_rep=40, noise_std=0.0,
                                 rep_amplitude_jitter=0.0, body_jitter=0.0,
                                 seed=0))
    knee_x0 = max(f.positions[L.LEFT_KNEE][0] for f in correct.series.frames)
    assert knee_x0 < toe_line


@pytest.mark.parametrize("exercise", list(Exercise))
def test_series_validates_and_segments(exercise):
    spec = exercise_preset(exercise)
    cfg = RigConfig(exercise=exercise, reps=6, frames_per_rep=40,
                    noise_std=0.0, seed=2)
    out = generate(cfg)
    assert validate_series(out.series, spec) == []
    pre = extract_arrays(out.series, spec)
    bounds = segment_reps(pre.signal)
    assert len(bounds.reps) == 6
    for (s, e), (ts, te) in zip(bounds.reps, out.boundaries):
        assert abs(s - ts) <= 2 and abs(e - te) <= 2


def test_default_noise_still_segments_exactly():
    for seed in range(5):
        cfg = RigConfig(exercise=Exercise.SQUATS, reps=7, frames_per_rep=40, seed=seed)
        out = generate(cfg)
        spec = exercise_preset(Exercise.SQUATS)
        bounds = segment_reps(extract_arrays(out.series, spec).signal)
        assert len(bounds.reps) == 7


def test_generate_dataset_reps_and_labels():
    outs = generate_dataset(Exercise.SQUATS, [0, 1, 3], reps_per_class=12,
                            seed=5, reps_per_session=5)
    by_label = {}
    for out in outs:
        by_label.setdefault(out.label.id, 0)
        by_label[out.label.id] += out.config.reps
    assert set(by_label) == {0, 1, 3}
    assert all(v >= 12 for v in by_label.values())
    severities = {out.config.fault_severity for out in outs if out.label.id != 0}
    assert len(severities) > 1  # sessions vary
