"""The canonical landmark wire format (the contract with the analysis engine).

One UTF-8 text file per clip:
  line 1: JSON header {"landmarks": [names...], "frame_rate": hz,
                       "exercise": optional, "source": optional}
  line 2+: timestamp,x,y,z,visibility,... CSV records (4 fields per landmark,
           header order), floats with 6 decimal places, timestamps strictly
           increasing.
"""

from __future__ import annotations

import json
from pathlib import Path

# 25 canonical landmark names, wire order. Must match the analysis engine.
CANONICAL_LANDMARKS = (
    "nose",
    "left_eye", "right_eye",
    "left_ear", "right_ear",
    "left_shoulder", "right_shoulder",
    "left_elbow", "right_elbow",
    "left_wrist", "right_wrist",
    "left_hand", "right_hand",
    "left_hip", "right_hip",
    "left_knee", "right_knee",
    "left_ankle", "right_ankle",
    "left_heel", "right_heel",
    "left_toe", "right_toe",
    "neck", "pelvis",
)


class LandmarkWriter:
    """Streams records to a landmark file; one writer per output file."""

    def __init__(self, path: str | Path, landmarks=CANONICAL_LANDMARKS,
                 frame_rate: float = 30.0, exercise: str | None = None,
                 source: str = "pose-extractor"):
        self.landmarks = tuple(landmarks)
        self._fh = open(path, "w", encoding="utf-8")
        header = {"landmarks": list(self.landmarks), "frame_rate": frame_rate}
        if exercise:
            header["exercise"] = exercise
        if source:
            header["source"] = source
        self._fh.write(json.dumps(header, sort_keys=True) + "\n")
        self._last_ts = None

    def write_frame(self, timestamp: float, detections: dict) -> None:
        """detections: name -> (x, y, z, visibility); absent names get
        visibility 0 at the origin (the detection-failure contract)."""
        if self._last_ts is not None and timestamp <= self._last_ts:
            raise ValueError(f"timestamp {timestamp} not increasing")
        self._last_ts = timestamp
        parts = [f"{timestamp:.6f}"]
        for name in self.landmarks:
            x, y, z, vis = detections.get(name, (0.0, 0.0, 0.0, 0.0))
            parts += [f"{x:.6f}", f"{y:.6f}", f"{z:.6f}", f"{vis:.6f}"]
        self._fh.write(",".join(parts) + "\n")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
