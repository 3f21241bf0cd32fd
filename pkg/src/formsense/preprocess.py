"""Raw landmark series -> normalized, smoothed 2D trajectories.

Facing normalization and the rep-counting signal are computed over the whole
series; LOWESS smoothing, quality gating and min-max normalization are
applied per rep so that batch and streaming runs see bit-identical inputs
for every completed rep. The z coordinate is dropped once facing is fixed;
the physics model is 2D.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import (
    ConfigError,
    ExerciseSpec,
    LandmarkFrame,
    LandmarkId,
    LandmarkSeries,
    RepSegment,
)

# Width of the centered moving average behind the rep-counting signal.
# Fixed (not a fraction of the series) so incremental and batch runs agree.
SIGNAL_WINDOW = 5


@dataclass(frozen=True)
class SmoothingConfig:
    lowess_fraction: float = 0.1
    lowess_iterations: int = 2

    def __post_init__(self):
        if not 0.0 < self.lowess_fraction <= 1.0:
            raise ConfigError("lowess_fraction must be in (0, 1]")
        if not 0 <= self.lowess_iterations <= 5:
            raise ConfigError("lowess_iterations must be in [0, 5]")


@dataclass(frozen=True)
class QualityGate:
    min_visibility: float = 0.5
    max_residual: float = 0.08

    def __post_init__(self):
        if not 0.0 <= self.min_visibility <= 1.0:
            raise ConfigError("min_visibility must be in [0, 1]")
        if self.max_residual < 0.0:
            raise ConfigError("max_residual must be non-negative")


@dataclass(frozen=True)
class GateResult:
    accepted: bool
    reason: str = ""


_FACING_PAIRS = (
    (LandmarkId.LEFT_HIP, LandmarkId.RIGHT_HIP),
    (LandmarkId.LEFT_SHOULDER, LandmarkId.RIGHT_SHOULDER),
)


def normalize_facing(series: LandmarkSeries, spec: ExerciseSpec) -> LandmarkSeries:
    """Mirror the series (x -> 1 - x) unless it already faces canonically.

    Canonical: the left indicator's mean x does not exceed its right
    counterpart's. Hips are preferred indicators, shoulders the fallback.
    """
    if not facing_flip_needed(series.frames, series.landmarks):
        return series
    mirrored = [
        LandmarkFrame(
            timestamp=f.timestamp,
            positions={lm: (1.0 - x, y, z) for lm, (x, y, z) in f.positions.items()},
            visibility=dict(f.visibility),
        )
        for f in series.frames
    ]
    return LandmarkSeries(frames=mirrored, frame_rate=series.frame_rate,
                          landmarks=series.landmarks, source=series.source,
                          exercise=series.exercise)


def moving_average(values, width: int = SIGNAL_WINDOW) -> np.ndarray:
    """Centered moving average; windows shrink symmetrically at the edges."""
    y = np.asarray(values, dtype=float)
    if width <= 1 or len(y) == 0:
        return y.copy()
    half = width // 2
    csum = np.concatenate(([0.0], np.cumsum(y)))
    i = np.arange(len(y))
    lo = np.maximum(i - half, 0)
    hi = np.minimum(i + half, len(y) - 1)
    return (csum[hi + 1] - csum[lo]) / (hi + 1 - lo)


def _neighbor_windows(n: int, k: int) -> np.ndarray:
    # k nearest indices of i form the contiguous window starting at
    # clip(i - k//2, 0, n - k); equal-distance ties resolve leftward.
    starts = np.clip(np.arange(n) - k // 2, 0, n - k)
    return starts[:, None] + np.arange(k)[None, :]


def _fit_windows(y: np.ndarray, idx: np.ndarray, weights: np.ndarray) -> np.ndarray:
    # Weighted linear fit per row, evaluated at the row's own index.
    x = idx.astype(float)
    t = np.arange(len(y), dtype=float)
    sw = weights.sum(axis=1)
    swx = (weights * x).sum(axis=1)
    swy = (weights * y[idx]).sum(axis=1)
    swxx = (weights * x * x).sum(axis=1)
    swxy = (weights * x * y[idx]).sum(axis=1)
    denom = sw * swxx - swx * swx
    ok = denom > 1e-12 * np.maximum(sw * swxx, 1e-30)
    slope = np.where(ok, swxy * sw - swx * swy, 0.0) / np.where(ok, denom, 1.0)
    intercept = np.where(sw > 0, (swy - slope * swx) / np.where(sw > 0, sw, 1.0), 0.0)
    out = intercept + slope * t
    # all-zero weight rows (single-neighbor windows) reproduce the input
    return np.where(sw > 0, out, y)


def lowess_smooth(values, config: SmoothingConfig = SmoothingConfig()) -> np.ndarray:
    """Locally weighted linear smoothing with tricube weights.

    Each output is a weighted linear fit over the nearest
    ceil(fraction * N) points, re-weighted `lowess_iterations` times with
    bisquare robustness weights.
    """
    y = np.asarray(values, dtype=float)
    if y.ndim != 1 or len(y) < 3:
        raise ValueError("lowess needs a 1-D signal of length >= 3")
    n = len(y)
    k = int(np.ceil(config.lowess_fraction * n))
    idx = _neighbor_windows(n, k)
    dist = np.abs(idx - np.arange(n)[:, None]).astype(float)
    dmax = dist.max(axis=1)
    safe = np.where(dmax > 0, dmax, 1.0)
    u = dist / safe[:, None]
    tricube = np.clip(1.0 - u ** 3, 0.0, None) ** 3
    # degenerate single-point window: keep the point itself
    tricube[dmax == 0] = 0.0
    tricube[dmax == 0, 0] = 1.0

    robust = np.ones(n)
    fitted = _fit_windows(y, idx, tricube * robust[idx])
    for _ in range(config.lowess_iterations):
        resid = y - fitted
        s = np.median(np.abs(resid))
        if s <= 0:
            break
        r = resid / (6.0 * s)
        robust = np.clip(1.0 - r ** 2, 0.0, None) ** 2
        fitted = _fit_windows(y, idx, tricube * robust[idx])
    return fitted


def estimate_velocity(trajectory) -> np.ndarray:
    """Per-step displacement: v[t] = p[t] - p[t-1], v[0] = 0."""
    p = np.asarray(trajectory, dtype=float)
    if len(p) == 0:
        return p.copy()
    v = np.zeros_like(p)
    v[1:] = p[1:] - p[:-1]
    return v


def minmax_normalize(segment: RepSegment) -> RepSegment:
    """Map the rep's coordinates to [0, 1] per axis, all landmarks jointly.

    A degenerate axis (max == min) maps to 0.5 everywhere.
    """
    traj = np.asarray(segment.trajectories, dtype=float)
    out = np.empty_like(traj)
    for axis in range(2):
        v = traj[..., axis]
        lo, hi = v.min(), v.max()
        out[..., axis] = 0.5 if hi == lo else (v - lo) / (hi - lo)
    return replace(segment, trajectories=out)


@dataclass
class PreprocessedSeries:
    """Facing-normalized 2D arrays of one series plus the counting signal."""

    landmarks: tuple[LandmarkId, ...]
    raw: np.ndarray         # (n_landmarks, n_frames, 2)
    visibility: np.ndarray  # (n_landmarks, n_frames)
    timestamps: np.ndarray  # (n_frames,)
    signal: np.ndarray      # rep-counting signal, (n_frames,)
    frame_rate: float


def counting_signal(primary_y, spec: ExerciseSpec,
                    window: int = SIGNAL_WINDOW) -> np.ndarray:
    """Smoothed displacement signal whose peaks mark rep apices."""
    return spec.counting_sign * moving_average(primary_y, window)


def extract_arrays(series: LandmarkSeries, spec: ExerciseSpec,
                   signal_window: int = SIGNAL_WINDOW) -> PreprocessedSeries:
    faced = normalize_facing(series, spec)
    lms = spec.landmarks
    n = len(faced.frames)
    raw = np.empty((len(lms), n, 2))
    vis = np.empty((len(lms), n))
    ts = np.array([f.timestamp for f in faced.frames], dtype=float)
    for i, lm in enumerate(lms):
        for t, frame in enumerate(faced.frames):
            x, y, _ = frame.positions[lm]
            raw[i, t] = (x, y)
            vis[i, t] = frame.visibility.get(lm, 1.0)
    primary = spec.landmark_index(spec.primary_landmark)
    signal = counting_signal(raw[primary, :, 1], spec, signal_window)
    return PreprocessedSeries(landmarks=lms, raw=raw, visibility=vis,
                              timestamps=ts, signal=signal,
                              frame_rate=series.frame_rate)


def smooth_rep(raw_slice: np.ndarray,
               smoothing: SmoothingConfig = SmoothingConfig()) -> np.ndarray:
    """LOWESS-smooth each landmark coordinate within one rep."""
    out = np.empty_like(raw_slice)
    n = raw_slice.shape[1]
    for i in range(raw_slice.shape[0]):
        for axis in range(2):
            if n >= 3:
                out[i, :, axis] = lowess_smooth(raw_slice[i, :, axis], smoothing)
            else:
                out[i, :, axis] = raw_slice[i, :, axis]
    return out


def gate_rep(segment: RepSegment, visibility: np.ndarray, gate: QualityGate,
             smoothed: np.ndarray | None = None,
             smoothing: SmoothingConfig = SmoothingConfig()) -> GateResult:
    """Accept or reject one rep: visibility floor and smoothing residual cap.

    `segment.trajectories` must hold the raw (unsmoothed) slice; `visibility`
    is the matching (n_landmarks, n_frames) slice. The smoothed counterpart
    is computed here unless supplied.
    """
    raw_slice = np.asarray(segment.trajectories, dtype=float)
    for i, lm in enumerate(segment.landmarks):
        mean_vis = float(np.asarray(visibility)[i].mean())
        if mean_vis < gate.min_visibility:
            return GateResult(False, f"{lm.value}: mean visibility {mean_vis:.3f} "
                                     f"< {gate.min_visibility}")
    if smoothed is None:
        smoothed = smooth_rep(raw_slice, smoothing)
    resid = np.abs(raw_slice - smoothed)
    worst = np.unravel_index(int(np.argmax(resid)), resid.shape)
    if resid[worst] > gate.max_residual:
        lm = segment.landmarks[worst[0]]
        return GateResult(False, f"{lm.value}: smoothing residual {resid[worst]:.3f} "
                                 f"> {gate.max_residual}")
    return GateResult(True)


def facing_flip_needed(frames, available_landmarks) -> bool:
    """True when the left indicator's mean x exceeds its right counterpart's."""
    available = set(available_landmarks)
    for left, right in _FACING_PAIRS:
        if left in available and right in available:
            if not frames:
                return False
            lx = float(np.mean([f.positions[left][0] for f in frames]))
            rx = float(np.mean([f.positions[right][0] for f in frames]))
            return lx > rx
    raise ConfigError("series has neither hip nor shoulder pair for facing")
