import numpy as np
import pytest
from scipy.signal import find_peaks as scipy_find_peaks

from formsense.model import Exercise, LandmarkFrame, exercise_preset
from formsense.preprocess import counting_signal
from formsense.segmentation import (
    OnlineSegmenter,
    find_peaks,
    prominence_cutoff,
    segment_reps,
)


def oracle_peaks_and_prominences(signal):
    """Independent slow oracle: run-scan maxima + per-side contour walk."""
    y = [float(v) for v in signal]
    n = len(y)
    peaks = []
    runs = []
    start = 0
    for i in range(1, n + 1):
        if i == n or y[i] != y[start]:
            runs.append((start, i - 1))
            start = i
    for a, b in runs:
        if a == 0 or b == n - 1:
            continue
        if y[a - 1] < y[a] and y[b + 1] < y[a]:
            peaks.append((a + b) // 2)
    out = []
    for p in peaks:
        h = y[p]
        i = p
        left_min = h
        while i > 0 and y[i - 1] <= h:
            i -= 1
            left_min = min(left_min, y[i])
        j = p
        right_min = h
        while j < n - 1 and y[j + 1] <= h:
            j += 1
            right_min = min(right_min, y[j])
        out.append((p, h - max(left_min, right_min)))
    return out


def test_simple_triangle():
    peaks = find_peaks([0.0, 1.0, 0.0])
    assert len(peaks) == 1
    assert peaks[0].index == 1
    assert peaks[0].prominence == 1.0


def test_monotone_has_no_peaks():
    assert find_peaks(np.arange(50, dtype=float)) == []
    assert find_peaks(np.full(20, 2.0)) == []


def test_three_period_sine_prominences():
    t = np.arange(300)
    y = np.sin(2 * np.pi * t / 100)
    peaks = find_peaks(y)
    assert len(peaks) == 3
    # middle peak spans full trough-to-crest; boundary peaks stop at the ends
    assert peaks[1].prominence == pytest.approx(2.0, abs=0.01)
    oracle = dict(oracle_peaks_and_prominences(y))
    for p in peaks:
        assert p.prominence == oracle[p.index]


def test_plateau_peaks_take_left_center():
    y = np.array([0.0, 1.0, 1.0, 0.0, 0.0, 2.0, 2.0, 2.0, 0.0])
    peaks = find_peaks(y)
    assert [p.index for p in peaks] == [1, 6]
    oracle = oracle_peaks_and_prominences(y)
    assert [(p.index, p.prominence) for p in peaks] == oracle


def test_prominence_oracle_on_random_signals(rng):
    for trial in range(120):
        n = int(rng.integers(3, 200))
        if trial % 2:
            y = rng.standard_normal(n)
        else:
            y = rng.integers(0, 6, size=n).astype(float)  # plateau-rich
        mine = [(p.index, p.prominence) for p in find_peaks(y)]
        assert mine == oracle_peaks_and_prominences(y)


def test_matches_scipy_on_smooth_signals(rng):
    for _ in range(30):
        y = rng.standard_normal(int(rng.integers(10, 150)))
        mine = find_peaks(y)
        idx, props = scipy_find_peaks(y, prominence=0.0)
        assert [p.index for p in mine] == list(idx)
        assert np.array_equal([p.prominence for p in mine], props["prominences"])


def test_segment_reps_pure_sinusoid():
    t = np.arange(500)
    y = -np.cos(2 * np.pi * t / 100)  # 5 full periods, valleys at k*100
    bounds = segment_reps(y)
    assert len(bounds.reps) == 5
    for k, (s, e) in enumerate(bounds.reps):
        assert abs(s - 100 * k) <= 2 or (k == 0 and s == 0)
        assert abs(e - 100 * (k + 1)) <= 2 or (k == 4 and e == len(y) - 1)


def test_segment_reps_ignores_small_jitter():
    t = np.arange(500)
    y = -np.cos(2 * np.pi * t / 100)
    bounds = segment_reps(y)
    cutoff = bounds.cutoff
    jitter = 0.2 * cutoff * np.sin(2 * np.pi * t / 7)
    noisy = segment_reps(y + jitter)
    assert len(noisy.reps) == 5


def test_segment_reps_constant_signal():
    bounds = segment_reps(np.full(100, 0.3))
    assert bounds.reps == []


def test_scale_equivariance(rng):
    y = rng.standard_normal(150).cumsum()
    base = segment_reps(y)
    scaled = segment_reps(3.5 * y)
    assert [p.index for p in scaled.kept_peaks] == [p.index for p in base.kept_peaks]
    assert scaled.cutoff == pytest.approx(3.5 * base.cutoff, rel=1e-12)
    for a, b in zip(scaled.kept_peaks, base.kept_peaks):
        assert a.prominence == pytest.approx(3.5 * b.prominence, rel=1e-12)
    assert scaled.reps == base.reps


def test_one_more_period_adds_one_rep():
    for periods in (3, 4, 5, 6):
        t = np.arange(periods * 80)
        y = -np.cos(2 * np.pi * t / 80)
        assert len(segment_reps(y).reps) == periods


def _spec_and_frames(y_values, frame_rate=30.0):
    spec = exercise_preset(Exercise.SQUATS)
    frames = []
    for i, y in enumerate(y_values):
        positions = {lm: (0.5, 0.5, 0.0) for lm in spec.landmarks}
        positions[spec.primary_landmark] = (0.45, float(y), 0.0)
        frames.append(LandmarkFrame(timestamp=i / frame_rate, positions=positions,
                                    visibility={lm: 1.0 for lm in spec.landmarks}))
    return spec, frames


def test_online_matches_offline_boundaries(rng):
    t = np.arange(400)
    hip_y = 0.55 + 0.08 * (1 - np.cos(2 * np.pi * t / 80)) / 2 \
        + 0.002 * rng.standard_normal(400)
    spec, frames = _spec_and_frames(hip_y)
    offline = segment_reps(counting_signal(hip_y, spec))

    seg = OnlineSegmenter(spec)
    events = []
    for frame in frames:
        events.extend(seg.push(frame))
    events.extend(seg.finalize())

    assert len(events) == len(offline.reps)
    for ev, (s, e) in zip(events[:-1], offline.reps[:-1]):
        assert abs(ev.start_frame - s) <= 2
        assert abs(ev.end_frame - e) <= 2
        assert ev.detection_lag >= 0.0


def test_online_does_not_emit_mid_rep():
    t = np.arange(130)  # one full rep + an unfinished ascent
    hip_y = 0.55 + 0.08 * (1 - np.cos(2 * np.pi * t / 80)) / 2
    spec, frames = _spec_and_frames(hip_y)
    seg = OnlineSegmenter(spec)
    events = []
    for frame in frames:
        events.extend(seg.push(frame))
    events.extend(seg.finalize())
    assert len(events) == 1  # the complete rep only


def test_online_two_reps_then_silence():
    t = np.arange(160)
    hip_y = 0.55 + 0.08 * (1 - np.cos(2 * np.pi * t / 80)) / 2
    flat = np.full(60, hip_y[159])
    spec, frames = _spec_and_frames(np.concatenate([hip_y, flat]))
    seg = OnlineSegmenter(spec)
    events = []
    for frame in frames:
        events.extend(seg.push(frame))
    events.extend(seg.finalize())
    assert len(events) == 2


def test_cutoff_is_population_std():
    peaks = find_peaks(np.array([0, 2, 0, 1, 0, 3, 0], dtype=float))
    proms = [p.prominence for p in peaks]
    assert prominence_cutoff(peaks) == pytest.approx(np.std(proms))
