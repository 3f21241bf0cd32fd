"""Fixed-length spectral signatures of rollout-error time series.

Each landmark's error series is evaluated at 11 fixed frequencies spanning
DC to Nyquist (w_k = k*pi/10); magnitude and phase at every grid point are
concatenated in landmark order, so reps of any duration map to vectors of
identical length (22 per landmark).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import RolloutError

GRID_POINTS = 11
FREQUENCY_GRID = np.pi * np.arange(GRID_POINTS) / (GRID_POINTS - 1)
GRID_TAG = "pi-grid-11"


def dtft_at(signal, omega: float) -> complex:
    """Discrete-time Fourier transform of a finite signal at one frequency."""
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1 or len(x) == 0:
        raise ValueError("dtft needs a non-empty 1-D signal")
    n = np.arange(len(x))
    return complex(np.sum(x * np.exp(-1j * omega * n)))


@dataclass(frozen=True)
class ErrorSignature:
    """Concatenated per-landmark amplitudes and phases on the fixed grid."""

    landmarks: tuple
    values: np.ndarray  # 22 * n_landmarks
    grid_tag: str = GRID_TAG

    def __len__(self) -> int:
        return len(self.values)


def signature(error: RolloutError) -> ErrorSignature:
    """Spectral signature of one rep's rollout error."""
    per_landmark = np.asarray(error.per_landmark, dtype=float)
    if per_landmark.ndim != 2 or per_landmark.shape[1] == 0:
        raise ValueError("rollout error series must be non-empty")
    n = np.arange(per_landmark.shape[1])
    basis = np.exp(-1j * np.outer(FREQUENCY_GRID, n))   # (11, T-1)
    spectra = per_landmark @ basis.T                     # (K, 11)
    amps = np.abs(spectra)
    phases = np.angle(spectra)
    phases[amps == 0.0] = 0.0
    phases[phases == -np.pi] = np.pi
    values = np.concatenate([np.concatenate([a, p]) for a, p in zip(amps, phases)])
    return ErrorSignature(landmarks=tuple(error.landmarks), values=values)


def feature_names(landmarks) -> list[str]:
    """Column names for serialized signature rows."""
    names = []
    for lm in landmarks:
        label = getattr(lm, "value", str(lm))
        names += [f"{label}_amp_{k}" for k in range(GRID_POINTS)]
        names += [f"{label}_phase_{k}" for k in range(GRID_POINTS)]
    return names


def save_rows(path, signatures: list[ErrorSignature], labels=None) -> None:
    """Write signatures as CSV: optional label column plus named features."""
    if not signatures:
        raise ValueError("nothing to save")
    names = feature_names(signatures[0].landmarks)
    header = (["label"] if labels is not None else []) + names
    lines = [",".join(header)]
    for i, sig in enumerate(signatures):
        row = [] if labels is None else [str(labels[i])]
        row += [f"{v:.12g}" for v in sig.values]
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def stack_features(signatures: list[ErrorSignature]) -> np.ndarray:
    """Feature matrix (n_reps, 22 * n_landmarks) for classifier training."""
    return np.stack([s.values for s in signatures])
