"""Canonical domain types shared by the whole pipeline.

Coordinates are normalized image units: x grows rightward, y grows downward,
both nominally in [0, 1]. The canonical landmark set has 25 named points;
exercise presets pick the representative subset that drives segmentation and
physics modeling.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class ConfigError(ValueError):
    """Raised for invalid presets, unknown names, or inconsistent configs."""


class LandmarkId(str, Enum):
    """Canonical body landmark names; ordinal order is the wire order."""

    NOSE = "nose"
    LEFT_EYE = "left_eye"
    RIGHT_EYE = "right_eye"
    LEFT_EAR = "left_ear"
    RIGHT_EAR = "right_ear"
    LEFT_SHOULDER = "left_shoulder"
    RIGHT_SHOULDER = "right_shoulder"
    LEFT_ELBOW = "left_elbow"
    RIGHT_ELBOW = "right_elbow"
    LEFT_WRIST = "left_wrist"
    RIGHT_WRIST = "right_wrist"
    LEFT_HAND = "left_hand"
    RIGHT_HAND = "right_hand"
    LEFT_HIP = "left_hip"
    RIGHT_HIP = "right_hip"
    LEFT_KNEE = "left_knee"
    RIGHT_KNEE = "right_knee"
    LEFT_ANKLE = "left_ankle"
    RIGHT_ANKLE = "right_ankle"
    LEFT_HEEL = "left_heel"
    RIGHT_HEEL = "right_heel"
    LEFT_TOE = "left_toe"
    RIGHT_TOE = "right_toe"
    NECK = "neck"
    PELVIS = "pelvis"

    @property
    def ordinal(self) -> int:
        return _ORDINALS[self]

    @classmethod
    def from_name(cls, name: str) -> "LandmarkId":
        try:
            return cls(name)
        except ValueError:
            raise ConfigError(f"unknown landmark name: {name!r}") from None


_ORDINALS = {lm: i for i, lm in enumerate(LandmarkId)}

CANONICAL_LANDMARKS: tuple[LandmarkId, ...] = tuple(LandmarkId)


class Exercise(str, Enum):
    SQUATS = "squats"
    SITUPS = "situps"
    PUSHUPS = "pushups"
    LUNGES = "lunges"
    SHOULDER_PRESS = "shoulder_press"
    FRONT_RAISE = "front_raise"

    @classmethod
    def from_name(cls, name: str) -> "Exercise":
        try:
            return cls(name)
        except ValueError:
            raise ConfigError(f"unknown exercise: {name!r}") from None


@dataclass(frozen=True)
class ClassLabel:
    """One diagnosis class: the correct form or a named fault."""

    id: int
    kind: str  # "correct" | "fault"
    recommendation: str = ""

    def __post_init__(self):
        if self.kind not in ("correct", "fault"):
            raise ConfigError(f"bad class kind: {self.kind!r}")
        if self.kind == "fault" and not self.recommendation:
            raise ConfigError("fault classes need a recommendation text")
        if self.kind == "correct" and self.recommendation:
            raise ConfigError("the correct class carries no recommendation")


# Two fixed virtual anchor nodes added to every exercise graph: one above and
# one below the scene, both on the vertical midline.
REFERENCE_POINTS: tuple[tuple[float, float], ...] = ((0.5, 0.0), (0.5, 1.0))


@dataclass(frozen=True)
class ExerciseSpec:
    """Representative landmarks, skeleton edges and diagnosis classes."""

    exercise: Exercise
    landmarks: tuple[LandmarkId, ...]
    edges: tuple[tuple[LandmarkId, LandmarkId], ...]  # undirected, stored once
    primary_landmark: LandmarkId
    classes: tuple[ClassLabel, ...]
    # +1 when the primary landmark's image-y increases toward the rep apex
    # (downward active phase, e.g. squat bottom); -1 when the apex is upward.
    counting_sign: int = 1
    reference_points: tuple[tuple[float, float], ...] = REFERENCE_POINTS

    def __post_init__(self):
        known = set(self.landmarks)
        if len(known) != len(self.landmarks):
            raise ConfigError("duplicate landmarks in spec")
        for a, b in self.edges:
            if a not in known or b not in known:
                raise ConfigError(f"edge endpoint not in landmark set: {a}-{b}")
        if self.primary_landmark not in known:
            raise ConfigError("primary landmark not in landmark set")
        correct = [c for c in self.classes if c.kind == "correct"]
        if len(correct) != 1:
            raise ConfigError("exactly one correct class required")
        if self.counting_sign not in (-1, 1):
            raise ConfigError("counting_sign must be +1 or -1")

    @property
    def correct_class(self) -> ClassLabel:
        return next(c for c in self.classes if c.kind == "correct")

    def class_by_id(self, class_id: int) -> ClassLabel:
        for c in self.classes:
            if c.id == class_id:
                return c
        raise ConfigError(f"unknown class id {class_id} for {self.exercise.value}")

    def landmark_index(self, lm: LandmarkId) -> int:
        try:
            return self.landmarks.index(lm)
        except ValueError:
            raise ConfigError(f"{lm.value} not in {self.exercise.value} spec") from None


@dataclass(frozen=True)
class LandmarkFrame:
    """One time sample: positions and visibility for a fixed landmark set."""

    timestamp: float
    positions: dict[LandmarkId, tuple[float, float, float]]
    visibility: dict[LandmarkId, float]


@dataclass
class LandmarkSeries:
    """An ordered run of frames from one session, all sharing a landmark set."""

    frames: list[LandmarkFrame]
    frame_rate: float
    landmarks: tuple[LandmarkId, ...]
    source: str = ""
    exercise: Exercise | None = None

    def __len__(self) -> int:
        return len(self.frames)


@dataclass
class RepSegment:
    """One repetition: a frame range plus per-landmark 2D trajectories.

    `trajectories` has shape (n_landmarks, n_frames, 2) in `landmarks` order;
    n_frames = end_frame - start_frame + 1.
    """

    rep_index: int
    start_frame: int
    end_frame: int
    landmarks: tuple[LandmarkId, ...]
    trajectories: "object"  # np.ndarray, kept loose to avoid importing numpy here
    label: ClassLabel | None = None

    def __post_init__(self):
        if self.start_frame >= self.end_frame:
            raise ValueError("rep must span at least two frames")

    @property
    def n_frames(self) -> int:
        return self.end_frame - self.start_frame + 1


@dataclass(frozen=True)
class Violation:
    """One broken series invariant; data, not an exception."""

    frame_index: int
    rule: str
    detail: str = ""


def _classes(correct_id: int, faults: list[str]) -> tuple[ClassLabel, ...]:
    out = [ClassLabel(id=correct_id, kind="correct")]
    out += [ClassLabel(id=i + 1, kind="fault", recommendation=t) for i, t in enumerate(faults)]
    return tuple(out)


L = LandmarkId

_PRESETS: dict[Exercise, ExerciseSpec] = {
    Exercise.SQUATS: ExerciseSpec(
        exercise=Exercise.SQUATS,
        landmarks=(L.NOSE, L.LEFT_HIP, L.RIGHT_HIP, L.LEFT_KNEE, L.RIGHT_KNEE),
        edges=(
            (L.NOSE, L.LEFT_HIP),
            (L.NOSE, L.RIGHT_HIP),
            (L.LEFT_HIP, L.RIGHT_HIP),
            (L.LEFT_HIP, L.LEFT_KNEE),
            (L.RIGHT_HIP, L.RIGHT_KNEE),
        ),
        primary_landmark=L.LEFT_HIP,
        counting_sign=1,
        classes=_classes(0, [
            "Keep your knees behind the toes",
            "Don't bend your knees inward",
            "Keep your Feet shoulder-width apart",
        ]),
    ),
    # Side-view exercises use the left-side canonical ids for the
    # side-neutral landmark names.
    Exercise.SITUPS: ExerciseSpec(
        exercise=Exercise.SITUPS,
        landmarks=(L.NOSE, L.LEFT_SHOULDER, L.LEFT_HIP, L.LEFT_KNEE),
        edges=(
            (L.NOSE, L.LEFT_SHOULDER),
            (L.LEFT_SHOULDER, L.LEFT_HIP),
            (L.LEFT_HIP, L.LEFT_KNEE),
        ),
        primary_landmark=L.LEFT_SHOULDER,
        counting_sign=-1,  # apex = torso raised = smaller image y
        classes=_classes(0, [
            "Your back should rise up completely",
        ]),
    ),
    Exercise.PUSHUPS: ExerciseSpec(
        exercise=Exercise.PUSHUPS,
        landmarks=(L.LEFT_SHOULDER, L.LEFT_HAND, L.LEFT_HIP, L.LEFT_TOE),
        edges=(
            (L.LEFT_SHOULDER, L.LEFT_HAND),
            (L.LEFT_SHOULDER, L.LEFT_HIP),
            (L.LEFT_HIP, L.LEFT_TOE),
        ),
        primary_landmark=L.LEFT_SHOULDER,
        counting_sign=1,  # apex = chest lowered = larger image y
        classes=_classes(0, [
            "Keep your Knees-hips-Shoulders in a straight line",
            "Lower your chest to align it with hip",
            "Lower your hips",
            "Your chest should not touch the ground",
        ]),
    ),
    # Lunges: "front" leg mapped to the left ids, "back" leg to the right.
    Exercise.LUNGES: ExerciseSpec(
        exercise=Exercise.LUNGES,
        landmarks=(L.LEFT_SHOULDER, L.LEFT_HIP, L.LEFT_KNEE, L.RIGHT_KNEE,
                   L.RIGHT_TOE, L.LEFT_HEEL),
        edges=(
            (L.LEFT_SHOULDER, L.LEFT_HIP),
            (L.LEFT_HIP, L.LEFT_KNEE),
            (L.LEFT_HIP, L.RIGHT_KNEE),
            (L.RIGHT_KNEE, L.RIGHT_TOE),
            (L.LEFT_KNEE, L.LEFT_HEEL),
        ),
        primary_landmark=L.LEFT_HIP,
        counting_sign=1,
        classes=_classes(0, [
            "Keep your knees behind the toes",
            "Keep your legs closer, they are too wide apart",
        ]),
    ),
    Exercise.SHOULDER_PRESS: ExerciseSpec(
        exercise=Exercise.SHOULDER_PRESS,
        landmarks=(L.LEFT_SHOULDER, L.RIGHT_SHOULDER, L.LEFT_ELBOW,
                   L.RIGHT_ELBOW, L.LEFT_WRIST, L.RIGHT_WRIST),
        edges=(
            (L.LEFT_SHOULDER, L.RIGHT_SHOULDER),
            (L.LEFT_SHOULDER, L.LEFT_ELBOW),
            (L.LEFT_ELBOW, L.LEFT_WRIST),
            (L.RIGHT_SHOULDER, L.RIGHT_ELBOW),
            (L.RIGHT_ELBOW, L.RIGHT_WRIST),
        ),
        primary_landmark=L.LEFT_WRIST,
        counting_sign=-1,  # apex = arms pressed up
        classes=_classes(0, [
            "Extend your arms fully overhead",
            "Keep your elbows under your wrists",
        ]),
    ),
    Exercise.FRONT_RAISE: ExerciseSpec(
        exercise=Exercise.FRONT_RAISE,
        landmarks=(L.LEFT_SHOULDER, L.RIGHT_SHOULDER, L.LEFT_ELBOW,
                   L.RIGHT_ELBOW, L.LEFT_WRIST, L.RIGHT_WRIST),
        edges=(
            (L.LEFT_SHOULDER, L.RIGHT_SHOULDER),
            (L.LEFT_SHOULDER, L.LEFT_ELBOW),
            (L.LEFT_ELBOW, L.LEFT_WRIST),
            (L.RIGHT_SHOULDER, L.RIGHT_ELBOW),
            (L.RIGHT_ELBOW, L.RIGHT_WRIST),
        ),
        primary_landmark=L.LEFT_WRIST,
        counting_sign=-1,  # apex = arms raised to shoulder height
        classes=_classes(0, [
            "Raise your arms up to shoulder height",
            "Don't swing your torso",
        ]),
    ),
}


def exercise_preset(exercise: Exercise | str) -> ExerciseSpec:
    """Return the immutable preset for a supported exercise."""
    if isinstance(exercise, str):
        exercise = Exercise.from_name(exercise)
    return _PRESETS[exercise]


def validate_series(series: LandmarkSeries, spec: ExerciseSpec) -> list[Violation]:
    """Check series invariants against a spec; violations are data."""
    out: list[Violation] = []
    required = set(spec.landmarks)
    declared = set(series.landmarks)
    for lm in spec.landmarks:
        if lm not in declared:
            out.append(Violation(-1, "landmark-set", f"{lm.value} not in series header"))
    prev_ts = None
    for i, frame in enumerate(series.frames):
        if set(frame.positions) != declared:
            out.append(Violation(i, "landmark-set", "frame landmark set differs from header"))
        for lm in required & set(frame.positions):
            x, y, z = frame.positions[lm]
            if not (_finite(x) and _finite(y) and _finite(z)):
                out.append(Violation(i, "presence", f"{lm.value} has non-finite coordinates"))
        for lm, v in frame.visibility.items():
            if not (_finite(v) and 0.0 <= v <= 1.0):
                out.append(Violation(i, "visibility-range", f"{lm.value} visibility {v!r}"))
        if prev_ts is not None and frame.timestamp <= prev_ts:
            out.append(Violation(i, "timestamp-order",
                                 f"{frame.timestamp!r} not after {prev_ts!r}"))
        prev_ts = frame.timestamp
    return out


def _finite(v: float) -> bool:
    return v == v and v not in (float("inf"), float("-inf"))
