import numpy as np
import pytest

from formsense.model import (
    Exercise,
    LandmarkFrame,
    LandmarkId,
    LandmarkSeries,
    exercise_preset,
)


def make_series(landmarks, coords, frame_rate=30.0, visibility=None, exercise=None):
    """Build a series from coords[lm] = list of (x, y) or (x, y, z)."""
    landmarks = tuple(landmarks)
    n = len(next(iter(coords.values())))
    frames = []
    for t in range(n):
        positions = {}
        vis = {}
        for lm in landmarks:
            p = coords[lm][t]
            positions[lm] = (p[0], p[1], p[2] if len(p) > 2 else 0.0)
            vis[lm] = 1.0 if visibility is None else visibility.get(lm, 1.0)
        frames.append(LandmarkFrame(timestamp=t / frame_rate, positions=positions,
                                    visibility=vis))
    return LandmarkSeries(frames=frames, frame_rate=frame_rate,
                          landmarks=landmarks, exercise=exercise)


@pytest.fixture
def squats_spec():
    return exercise_preset(Exercise.SQUATS)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
