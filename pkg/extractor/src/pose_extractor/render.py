"""Render marker clips from landmark trajectories (test rigs and demos)."""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np

from .backends import DEFAULT_MARKER_COLORS


def render_marker_clip(path: str | Path, trajectories: dict[str, np.ndarray],
                       n_frames: int, fps: float = 30.0, size: int = 320,
                       radius: int = 6,
                       colors: dict | None = None) -> None:
    """trajectories: name -> (n_frames, 2) normalized positions."""
    colors = colors or DEFAULT_MARKER_COLORS
    fourcc = cv2.VideoWriter_fourcc(*"MJPG")
    writer = cv2.VideoWriter(str(path), fourcc, fps, (size, size))
    if not writer.isOpened():
        raise RuntimeError("could not open video writer (MJPG)")
    try:
        for t in range(n_frames):
            frame = np.zeros((size, size, 3), dtype=np.uint8)
            for name, traj in trajectories.items():
                if name not in colors:
                    raise ValueError(f"no marker color for {name}")
                x = int(round(float(traj[t, 0]) * (size - 1)))
                y = int(round(float(traj[t, 1]) * (size - 1)))
                if 0 <= x < size and 0 <= y < size:
                    cv2.circle(frame, (x, y), radius, colors[name], -1)
            writer.write(frame)
    finally:
        writer.release()
