"""Run a pose backend over a video file, emit the canonical landmark format."""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import cv2

from .backends import make_backend
from .wire import CANONICAL_LANDMARKS, LandmarkWriter


@dataclass
class ExtractorConfig:
    video: Path
    out: Path
    exercise: str | None = None
    backend: str = "auto"
    min_confidence: float = 0.5
    landmarks: tuple[str, ...] = CANONICAL_LANDMARKS

    def __post_init__(self):
        unknown = set(self.landmarks) - set(CANONICAL_LANDMARKS)
        if unknown:
            raise ValueError(f"unknown landmarks requested: {sorted(unknown)}")


@dataclass
class ExtractResult:
    frames: int = 0
    detected: int = 0
    out: Path | None = None


def extract(cfg: ExtractorConfig) -> ExtractResult:
    """One record per decoded frame; detection failures emit zero visibility."""
    capture = cv2.VideoCapture(str(cfg.video))
    if not capture.isOpened():
        raise FileNotFoundError(f"cannot open video {cfg.video}")
    fps = capture.get(cv2.CAP_PROP_FPS) or 0.0
    if fps <= 0:
        fps = 30.0
    backend = make_backend(cfg.backend, cfg.min_confidence)
    result = ExtractResult(out=cfg.out)
    try:
        with LandmarkWriter(cfg.out, cfg.landmarks, frame_rate=fps,
                            exercise=cfg.exercise,
                            source=f"pose-extractor:{cfg.backend}") as writer:
            index = 0
            while True:
                ok, frame = capture.read()
                if not ok:
                    break
                detections = backend.detect(frame)
                if detections:
                    result.detected += 1
                writer.write_frame(index / fps, detections)
                index += 1
            result.frames = index
    finally:
        backend.close()
        capture.release()
    return result


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pose-extract",
        description="Extract pose landmarks from a video into the canonical "
                    "landmark file format.")
    parser.add_argument("--video", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--exercise", default=None,
                        help="exercise hint stored in the header")
    parser.add_argument("--backend", default="auto",
                        choices=("auto", "mediapipe", "marker"))
    parser.add_argument("--min-confidence", type=float, default=0.5)
    args = parser.parse_args(argv)
    try:
        cfg = ExtractorConfig(video=Path(args.video), out=Path(args.out),
                              exercise=args.exercise, backend=args.backend,
                              min_confidence=args.min_confidence)
        result = extract(cfg)
    except (ValueError, FileNotFoundError, ImportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {result.out}: {result.frames} frames, "
          f"{result.detected} with detections")
    return 0


if __name__ == "__main__":
    sys.exit(main())
