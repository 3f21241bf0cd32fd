"""Landmark series wire format: batch reader/writer and an incremental reader.

Format (UTF-8 text):
  line 1: JSON header {"landmarks": [names...], "frame_rate": hz,
                       "exercise": optional name, "source": optional text}
  line 2+: one CSV record per frame:
           timestamp,x,y,z,visibility,...   (4 fields per landmark, header order)
Floats are written with 6 decimal places; timestamps must strictly increase.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Iterator

from .model import Exercise, LandmarkFrame, LandmarkId, LandmarkSeries


class ParseError(ValueError):
    """Malformed landmark file or stream; carries a 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def _parse_header(line: str, line_no: int = 1) -> tuple[tuple[LandmarkId, ...], float, Exercise | None, str]:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(line_no, f"header is not valid JSON ({exc.msg})") from None
    if not isinstance(obj, dict) or "landmarks" not in obj or "frame_rate" not in obj:
        raise ParseError(line_no, "header must name 'landmarks' and 'frame_rate'")
    try:
        landmarks = tuple(LandmarkId.from_name(n) for n in obj["landmarks"])
    except Exception:
        raise ParseError(line_no, "header names an unknown landmark") from None
    if len(set(landmarks)) != len(landmarks) or not landmarks:
        raise ParseError(line_no, "header landmark list empty or has duplicates")
    try:
        rate = float(obj["frame_rate"])
    except (TypeError, ValueError):
        raise ParseError(line_no, "frame_rate is not a number") from None
    if rate <= 0:
        raise ParseError(line_no, "frame_rate must be positive")
    exercise = None
    if obj.get("exercise"):
        exercise = Exercise.from_name(obj["exercise"])
    return landmarks, rate, exercise, str(obj.get("source", ""))


def _parse_record(line: str, landmarks: tuple[LandmarkId, ...], line_no: int,
                  prev_ts: float | None) -> LandmarkFrame:
    fields = line.split(",")
    expect = 1 + 4 * len(landmarks)
    if len(fields) != expect:
        raise ParseError(line_no, f"expected {expect} fields, got {len(fields)}")
    try:
        values = [float(f) for f in fields]
    except ValueError:
        raise ParseError(line_no, "non-numeric field") from None
    ts = values[0]
    if prev_ts is not None and ts <= prev_ts:
        raise ParseError(line_no, f"timestamp {ts!r} not after {prev_ts!r}")
    positions: dict[LandmarkId, tuple[float, float, float]] = {}
    visibility: dict[LandmarkId, float] = {}
    for i, lm in enumerate(landmarks):
        x, y, z, vis = values[1 + 4 * i: 5 + 4 * i]
        positions[lm] = (x, y, z)
        visibility[lm] = vis
    return LandmarkFrame(timestamp=ts, positions=positions, visibility=visibility)


def read_series(path: str | Path) -> LandmarkSeries:
    """Parse a landmark file into a series; raises ParseError with line number."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise ParseError(1, "empty file, header missing")
    landmarks, rate, exercise, source = _parse_header(lines[0])
    frames: list[LandmarkFrame] = []
    prev_ts = None
    for idx, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        frame = _parse_record(line, landmarks, idx, prev_ts)
        prev_ts = frame.timestamp
        frames.append(frame)
    return LandmarkSeries(frames=frames, frame_rate=rate, landmarks=landmarks,
                          source=source, exercise=exercise)


def format_header(landmarks: Iterable[LandmarkId], frame_rate: float,
                  exercise: Exercise | None = None, source: str = "") -> str:
    obj = {"landmarks": [lm.value for lm in landmarks], "frame_rate": frame_rate}
    if exercise is not None:
        obj["exercise"] = exercise.value
    if source:
        obj["source"] = source
    return json.dumps(obj, sort_keys=True)


def format_record(frame: LandmarkFrame, landmarks: Iterable[LandmarkId]) -> str:
    parts = [f"{frame.timestamp:.6f}"]
    for lm in landmarks:
        x, y, z = frame.positions[lm]
        parts += [f"{x:.6f}", f"{y:.6f}", f"{z:.6f}", f"{frame.visibility[lm]:.6f}"]
    return ",".join(parts)


def write_series(series: LandmarkSeries, path: str | Path) -> None:
    """Write a series in the wire format (6-decimal floats)."""
    lines = [format_header(series.landmarks, series.frame_rate,
                           series.exercise, series.source)]
    lines += [format_record(f, series.landmarks) for f in series.frames]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class StreamHeader:
    """Header metadata surfaced by open_stream before the first frame."""

    def __init__(self, landmarks: tuple[LandmarkId, ...], frame_rate: float,
                 exercise: Exercise | None, source: str):
        self.landmarks = landmarks
        self.frame_rate = frame_rate
        self.exercise = exercise
        self.source = source


class FrameStream:
    """Incremental reader over byte chunks; single consumer.

    Frames surface as soon as their full record (newline-terminated) has
    arrived; a partial trailing record is held until completed. Iteration
    raises ParseError on a malformed record and then terminates.
    """

    def __init__(self, chunks: Iterable[bytes]):
        self._chunks = iter(chunks)
        self._buffer = b""
        self._line_no = 0
        self._header: StreamHeader | None = None
        self._prev_ts: float | None = None
        self._done = False

    @property
    def header(self) -> StreamHeader | None:
        return self._header

    def __iter__(self) -> Iterator[LandmarkFrame]:
        return self

    def __next__(self) -> LandmarkFrame:
        while True:
            line = self._next_line()
            if line is None:
                raise StopIteration
            self._line_no += 1
            if self._header is None:
                parsed = _parse_header(line, self._line_no)
                self._header = StreamHeader(*parsed)
                continue
            if not line.strip():
                continue
            frame = _parse_record(line, self._header.landmarks, self._line_no, self._prev_ts)
            self._prev_ts = frame.timestamp
            return frame

    def _next_line(self) -> str | None:
        while b"\n" not in self._buffer:
            if self._done:
                if self._buffer.strip():
                    # final record may lack the trailing newline
                    line = self._buffer.decode("utf-8")
                    self._buffer = b""
                    return line
                return None
            try:
                chunk = next(self._chunks)
            except StopIteration:
                self._done = True
                continue
            self._buffer += chunk
        raw, self._buffer = self._buffer.split(b"\n", 1)
        return raw.decode("utf-8")


def open_stream(source: Iterable[bytes]) -> FrameStream:
    """Wrap a byte-chunk iterable as an incremental frame iterator."""
    return FrameStream(source)


def iter_file_chunks(path: str | Path, chunk_size: int = 4096) -> Iterator[bytes]:
    with open(path, "rb") as fh:
        while True:
            chunk = fh.read(chunk_size)
            if not chunk:
                return
            yield chunk
