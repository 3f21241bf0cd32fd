"""Pose backends: detection per frame, mapped onto the canonical topology.

Every backend returns {canonical_name: (x, y, z, visibility)} with x, y in
normalized image units; frames with no detection return an empty dict.
"""

from __future__ import annotations

import numpy as np

from .wire import CANONICAL_LANDMARKS

# BlazePose 33-point topology -> canonical names. Derived points (neck,
# pelvis) are midpoints and carry the min visibility of their parents.
BLAZEPOSE_TO_CANONICAL = {
    0: "nose",
    2: "left_eye", 5: "right_eye",
    7: "left_ear", 8: "right_ear",
    11: "left_shoulder", 12: "right_shoulder",
    13: "left_elbow", 14: "right_elbow",
    15: "left_wrist", 16: "right_wrist",
    19: "left_hand", 20: "right_hand",
    23: "left_hip", 24: "right_hip",
    25: "left_knee", 26: "right_knee",
    27: "left_ankle", 28: "right_ankle",
    29: "left_heel", 30: "right_heel",
    31: "left_toe", 32: "right_toe",
}


class MediaPipeBackend:
    """Adapter over the mediapipe pose solution (optional dependency)."""

    def __init__(self, min_confidence: float = 0.5):
        try:
            import mediapipe as mp
        except ImportError as exc:
            raise ImportError(
                "mediapipe is not installed; use the marker backend or "
                "install pose-extractor[mediapipe]") from exc
        self._pose = mp.solutions.pose.Pose(
            static_image_mode=False,
            min_detection_confidence=min_confidence,
            min_tracking_confidence=min_confidence)

    def detect(self, frame_bgr: np.ndarray) -> dict:
        rgb = frame_bgr[:, :, ::-1]
        result = self._pose.process(rgb)
        if not result.pose_landmarks:
            return {}
        out = {}
        pts = result.pose_landmarks.landmark
        for idx, name in BLAZEPOSE_TO_CANONICAL.items():
            lm = pts[idx]
            out[name] = (lm.x, lm.y, lm.z, lm.visibility)
        for name, (a, b) in (("neck", ("left_shoulder", "right_shoulder")),
                             ("pelvis", ("left_hip", "right_hip"))):
            if a in out and b in out:
                pa, pb = out[a], out[b]
                out[name] = (0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1]),
                             0.5 * (pa[2] + pb[2]), min(pa[3], pb[3]))
        return out

    def close(self):
        self._pose.close()


# Marker palette: saturated BGR colors that survive MJPG compression; the
# subset a clip actually contains determines which landmarks are visible.
DEFAULT_MARKER_COLORS = {
    "nose": (0, 0, 255),
    "left_shoulder": (0, 255, 0),
    "right_shoulder": (255, 0, 0),
    "left_hip": (0, 255, 255),
    "right_hip": (255, 0, 255),
    "left_knee": (255, 255, 0),
    "right_knee": (0, 128, 255),
    "left_hand": (128, 255, 0),
    "left_toe": (255, 128, 0),
    "left_heel": (128, 0, 255),
    "right_toe": (0, 255, 128),
    "left_elbow": (160, 160, 255),
    "right_elbow": (255, 160, 160),
    "left_wrist": (64, 128, 128),
    "right_wrist": (192, 64, 64),
}


class ColorMarkerBackend:
    """Tracks uniquely colored circular markers; for synthetic clips and
    instrumented recordings."""

    def __init__(self, colors: dict[str, tuple[int, int, int]] | None = None,
                 tolerance: int = 110, min_pixels: int = 8):
        self.colors = dict(colors or DEFAULT_MARKER_COLORS)
        unknown = set(self.colors) - set(CANONICAL_LANDMARKS)
        if unknown:
            raise ValueError(f"marker colors for unknown landmarks: {sorted(unknown)}")
        self.tolerance = int(tolerance)
        self.min_pixels = int(min_pixels)

    def detect(self, frame_bgr: np.ndarray) -> dict:
        frame = frame_bgr.astype(np.int16)
        h, w = frame.shape[:2]
        out = {}
        for name, bgr in self.colors.items():
            dist = np.abs(frame - np.asarray(bgr, dtype=np.int16)).sum(axis=2)
            mask = dist < self.tolerance
            count = int(mask.sum())
            if count < self.min_pixels:
                continue
            ys, xs = np.nonzero(mask)
            out[name] = (float(xs.mean() / max(w - 1, 1)),
                         float(ys.mean() / max(h - 1, 1)),
                         0.0, 1.0)
        return out

    def close(self):
        pass


def make_backend(name: str, min_confidence: float = 0.5):
    if name == "mediapipe":
        return MediaPipeBackend(min_confidence)
    if name == "marker":
        return ColorMarkerBackend()
    if name == "auto":
        try:
            return MediaPipeBackend(min_confidence)
        except ImportError:
            return ColorMarkerBackend()
    raise ValueError(f"unknown backend {name!r} (mediapipe, marker, auto)")
