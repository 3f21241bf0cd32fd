import pytest

from formsense.model import (
    CANONICAL_LANDMARKS,
    ClassLabel,
    ConfigError,
    Exercise,
    LandmarkId,
    exercise_preset,
    validate_series,
)

from conftest import make_series

L = LandmarkId

# representative landmarks per exercise, transcribed independently
EXPECTED_LANDMARKS = {
    Exercise.SQUATS: {L.NOSE, L.LEFT_HIP, L.RIGHT_HIP, L.LEFT_KNEE, L.RIGHT_KNEE},
    Exercise.SITUPS: {L.NOSE, L.LEFT_SHOULDER, L.LEFT_HIP, L.LEFT_KNEE},
    Exercise.PUSHUPS: {L.LEFT_SHOULDER, L.LEFT_HAND, L.LEFT_HIP, L.LEFT_TOE},
    Exercise.LUNGES: {L.LEFT_SHOULDER, L.LEFT_HIP, L.LEFT_KNEE, L.RIGHT_KNEE,
                      L.RIGHT_TOE, L.LEFT_HEEL},
}

EXPECTED_RECOMMENDATIONS = {
    Exercise.LUNGES: [
        "Keep your knees behind the toes",
        "Keep your legs closer, they are too wide apart",
    ],
    Exercise.SQUATS: [
        "Keep your knees behind the toes",
        "Don't bend your knees inward",
        "Keep your Feet shoulder-width apart",
    ],
    Exercise.SITUPS: [
        "Your back should rise up completely",
    ],
    Exercise.PUSHUPS: [
        "Keep your Knees-hips-Shoulders in a straight line",
        "Lower your chest to align it with hip",
        "Lower your hips",
        "Your chest should not touch the ground",
    ],
}


def test_canonical_set_is_25_and_bijective():
    assert len(CANONICAL_LANDMARKS) == 25
    assert len({lm.value for lm in CANONICAL_LANDMARKS}) == 25
    for i, lm in enumerate(CANONICAL_LANDMARKS):
        assert lm.ordinal == i
        assert LandmarkId.from_name(lm.value) is lm


@pytest.mark.parametrize("exercise,expected", sorted(EXPECTED_LANDMARKS.items()))
def test_preset_landmark_tables(exercise, expected):
    assert set(exercise_preset(exercise).landmarks) == expected


@pytest.mark.parametrize("exercise,expected", sorted(EXPECTED_RECOMMENDATIONS.items()))
def test_preset_recommendation_texts(exercise, expected):
    spec = exercise_preset(exercise)
    faults = [c for c in spec.classes if c.kind == "fault"]
    assert [c.recommendation for c in faults] == expected
    correct = [c for c in spec.classes if c.kind == "correct"]
    assert len(correct) == 1 and correct[0].recommendation == ""


def test_lunges_has_six_landmarks_ending_front_heel():
    spec = exercise_preset(Exercise.LUNGES)
    assert len(spec.landmarks) == 6
    assert spec.landmarks[-1] == L.LEFT_HEEL  # front heel


def test_pushups_edges_form_the_expected_chain():
    spec = exercise_preset(Exercise.PUSHUPS)
    undirected = {frozenset(e) for e in spec.edges}
    assert undirected == {
        frozenset({L.LEFT_SHOULDER, L.LEFT_HAND}),
        frozenset({L.LEFT_SHOULDER, L.LEFT_HIP}),
        frozenset({L.LEFT_HIP, L.LEFT_TOE}),
    }


@pytest.mark.parametrize("exercise", list(Exercise))
def test_preset_edge_graph_is_connected(exercise):
    # breadth-first traversal oracle over the undirected edge set
    spec = exercise_preset(exercise)
    adjacency = {lm: set() for lm in spec.landmarks}
    for a, b in spec.edges:
        adjacency[a].add(b)
        adjacency[b].add(a)
    seen = {spec.landmarks[0]}
    frontier = [spec.landmarks[0]]
    while frontier:
        node = frontier.pop()
        for nxt in adjacency[node]:
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    assert seen == set(spec.landmarks)
    assert spec.primary_landmark in seen


def test_unknown_exercise_is_a_config_error():
    with pytest.raises(ConfigError):
        exercise_preset("deadlift")


def test_class_label_invariants():
    with pytest.raises(ConfigError):
        ClassLabel(id=1, kind="fault", recommendation="")
    with pytest.raises(ConfigError):
        ClassLabel(id=0, kind="correct", recommendation="nope")
    with pytest.raises(ConfigError):
        ClassLabel(id=0, kind="weird")


def _squat_coords(n):
    return {
        L.NOSE: [(0.5, 0.3)] * n,
        L.LEFT_HIP: [(0.45, 0.55)] * n,
        L.RIGHT_HIP: [(0.55, 0.55)] * n,
        L.LEFT_KNEE: [(0.45, 0.75)] * n,
        L.RIGHT_KNEE: [(0.55, 0.75)] * n,
    }


def test_validate_series_clean(squats_spec):
    series = make_series(squats_spec.landmarks, _squat_coords(100))
    assert validate_series(series, squats_spec) == []


def test_validate_series_flags_missing_landmark(squats_spec):
    series = make_series(squats_spec.landmarks, _squat_coords(10))
    frame = series.frames[7]
    frame.positions[L.LEFT_KNEE] = (float("nan"), 0.75, 0.0)
    violations = validate_series(series, squats_spec)
    assert len(violations) == 1
    assert violations[0].frame_index == 7
    assert "left_knee" in violations[0].detail


def test_validate_series_flags_timestamp_ties(squats_spec):
    series = make_series(squats_spec.landmarks, _squat_coords(6))
    stuck = series.frames[2].timestamp
    for i in (3, 4):
        frame = series.frames[i]
        series.frames[i] = type(frame)(timestamp=stuck, positions=frame.positions,
                                       visibility=frame.visibility)
    violations = validate_series(series, squats_spec)
    rules = [v.rule for v in violations]
    assert rules.count("timestamp-order") == 2
    assert {v.frame_index for v in violations} == {3, 4}


def test_validate_series_flags_bad_visibility(squats_spec):
    series = make_series(squats_spec.landmarks, _squat_coords(5))
    series.frames[2].visibility[L.NOSE] = 1.5
    violations = validate_series(series, squats_spec)
    assert [v.rule for v in violations] == ["visibility-range"]
