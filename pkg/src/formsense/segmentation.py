"""Repetition counting and delimiting from a periodic displacement signal.

Peaks are ranked by prominence (vertical distance to the lowest contour line
isolating the peak); the population standard deviation of all prominences is
the high-pass cutoff separating genuine rep apices from jitter. Reps span
valley to valley around each kept peak. An online variant applies the same
rule incrementally, emitting each rep once its end valley is confirmed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ExerciseSpec, LandmarkFrame, RepSegment
from .preprocess import counting_signal


@dataclass(frozen=True)
class Peak:
    index: int
    height: float
    prominence: float


@dataclass
class RepBoundaries:
    reps: list[tuple[int, int]]
    rejected_peaks: list[Peak]
    kept_peaks: list[Peak] = field(default_factory=list)
    cutoff: float = 0.0


def _local_maxima(signal: np.ndarray) -> list[tuple[int, float]]:
    # Runs of equal values count once, at the run's center (left-centered
    # for even widths); runs touching either end are not maxima.
    n = len(signal)
    out: list[tuple[int, float]] = []
    i = 1
    while i < n - 1:
        if signal[i] > signal[i - 1]:
            j = i
            while j + 1 < n and signal[j + 1] == signal[i]:
                j += 1
            if j < n - 1 and signal[j + 1] < signal[i]:
                out.append(((i + j) // 2, float(signal[i])))
            i = j + 1
        else:
            i += 1
    return out


def find_peaks(signal) -> list[Peak]:
    """All strict local maxima with their contour prominences.

    The prominence of a peak is its height minus the higher of the two
    minima found walking left and right until a strictly higher sample or
    the signal end.
    """
    y = np.asarray(signal, dtype=float)
    if y.ndim != 1 or len(y) < 3:
        return []
    peaks = []
    for idx, h in _local_maxima(y):
        higher = np.flatnonzero(y > h)
        left_of = higher[higher < idx]
        right_of = higher[higher > idx]
        lo = int(left_of[-1]) + 1 if len(left_of) else 0
        hi = int(right_of[0]) if len(right_of) else len(y)
        left_min = float(y[lo:idx + 1].min())
        right_min = float(y[idx:hi].min())
        peaks.append(Peak(index=idx, height=h,
                          prominence=h - max(left_min, right_min)))
    return peaks


def prominence_cutoff(peaks: list[Peak]) -> float:
    """Population standard deviation of all prominences."""
    if not peaks:
        return 0.0
    return float(np.std([p.prominence for p in peaks]))


def segment_reps(signal) -> RepBoundaries:
    """Delimit reps: keep peaks with prominence >= cutoff, split at valleys.

    Rep k runs from the minimum-signal index between kept peaks k-1 and k
    (signal start for the first) to the one between peaks k and k+1 (signal
    end for the last); adjacent reps share their valley frame.
    """
    y = np.asarray(signal, dtype=float)
    peaks = find_peaks(y)
    cutoff = prominence_cutoff(peaks)
    kept = [p for p in peaks if p.prominence >= cutoff]
    rejected = [p for p in peaks if p.prominence < cutoff]
    if not kept:
        return RepBoundaries(reps=[], rejected_peaks=rejected, kept_peaks=[],
                             cutoff=cutoff)
    bounds = [0]
    for a, b in zip(kept, kept[1:]):
        bounds.append(int(np.argmin(y[a.index:b.index + 1])) + a.index)
    bounds.append(len(y) - 1)
    reps = list(zip(bounds[:-1], bounds[1:]))
    return RepBoundaries(reps=reps, rejected_peaks=rejected, kept_peaks=kept,
                         cutoff=cutoff)


@dataclass(frozen=True)
class RepEvent:
    """One completed rep recognized by the online segmenter."""

    rep_index: int
    start_frame: int
    end_frame: int
    emitted_at_frame: int
    detection_lag: float  # seconds between the rep's end valley and emission


class OnlineSegmenter:
    """Stateful frame consumer emitting reps as soon as they are decidable.

    Applies the offline rule to the buffered signal after every frame; a rep
    is emitted once its end valley is followed by a confirmed ascent (at
    least a quarter of the running cutoff above the valley). Emissions are
    monotonic and never retracted. The cutoff needs at least two observed
    peaks before the first emission.
    """

    def __init__(self, spec: ExerciseSpec, frame_rate: float | None = None):
        self.spec = spec
        self.frame_rate = frame_rate
        self._primary_y: list[float] = []
        self._timestamps: list[float] = []
        self.frames: list[LandmarkFrame] = []
        self._last_end = 0
        self._count = 0

    def push(self, frame: LandmarkFrame) -> list[RepEvent]:
        """Consume one frame; return any reps completed by it."""
        pos = frame.positions.get(self.spec.primary_landmark)
        if pos is None:
            raise ValueError(f"frame lacks {self.spec.primary_landmark.value}")
        self.frames.append(frame)
        self._primary_y.append(pos[1])
        self._timestamps.append(frame.timestamp)
        return self._scan(final=False)

    def finalize(self) -> list[RepEvent]:
        """Flush reps decidable at stream end (full descent, no ascent yet)."""
        return self._scan(final=True)

    def _noise_floor(self, raw_signed: np.ndarray, y: np.ndarray) -> float:
        # Robust amplitude of the smoothed signal's noise, from the raw
        # residual; fake ascents/descents must clear several times this.
        resid = raw_signed - y
        mad = float(np.median(np.abs(resid - np.median(resid))))
        from .preprocess import SIGNAL_WINDOW

        return 1.4826 * mad / np.sqrt(SIGNAL_WINDOW)

    def _scan(self, final: bool) -> list[RepEvent]:
        n = len(self._primary_y)
        if n < 3:
            return []
        raw_signed = self.spec.counting_sign * np.asarray(self._primary_y)
        y = counting_signal(np.asarray(self._primary_y), self.spec)
        peaks = find_peaks(y)
        if len(peaks) < 2:
            return []
        cutoff = prominence_cutoff(peaks)
        floor = 8.0 * self._noise_floor(raw_signed, y)
        threshold = max(cutoff, floor, 1e-12)
        kept = [p for p in peaks
                if p.prominence >= threshold and p.index > self._last_end]
        margin = max(0.25 * cutoff, floor, 1e-12)
        events: list[RepEvent] = []
        for pos, peak in enumerate(kept):
            if pos + 1 < len(kept):
                # interior boundary: same argmin range as the offline rule
                nxt = kept[pos + 1].index
                valley = peak.index + int(np.argmin(y[peak.index:nxt + 1]))
                confirmed = True
            else:
                tail = y[peak.index:]
                valley_rel = int(np.argmin(tail))
                valley = peak.index + valley_rel
                descended = peak.height - y[valley] >= threshold
                if final:
                    confirmed = descended and valley > peak.index
                else:
                    confirmed = descended and bool(
                        np.any(tail[valley_rel:] >= y[valley] + margin))
            if not confirmed:
                break
            events.append(self._emit(valley))
        return events

    def _emit(self, valley: int) -> RepEvent:
        now = len(self._timestamps) - 1
        event = RepEvent(
            rep_index=self._count,
            start_frame=self._last_end,
            end_frame=valley,
            emitted_at_frame=now,
            detection_lag=float(self._timestamps[now] - self._timestamps[valley]),
        )
        self._last_end = valley
        self._count += 1
        return event

    def raw_segment(self, event: RepEvent) -> RepSegment:
        """Raw (unsmoothed, facing-as-received) trajectories for one event."""
        lms = self.spec.landmarks
        frames = self.frames[event.start_frame:event.end_frame + 1]
        traj = np.empty((len(lms), len(frames), 2))
        for i, lm in enumerate(lms):
            for t, fr in enumerate(frames):
                x, yy, _ = fr.positions[lm]
                traj[i, t] = (x, yy)
        return RepSegment(rep_index=event.rep_index, start_frame=event.start_frame,
                          end_frame=event.end_frame, landmarks=lms,
                          trajectories=traj)


def online_segmenter(spec: ExerciseSpec, frame_rate: float | None = None) -> OnlineSegmenter:
    return OnlineSegmenter(spec, frame_rate)
