import numpy as np
import pytest

from formsense.io import (
    ParseError,
    format_header,
    iter_file_chunks,
    open_stream,
    read_series,
    write_series,
)
from formsense.model import LandmarkFrame, LandmarkId, LandmarkSeries

L = LandmarkId


def _random_series(rng, n_frames=50, landmarks=(L.NOSE, L.LEFT_HIP, L.RIGHT_HIP)):
    frames = []
    t = 0.0
    for _ in range(n_frames):
        t += float(rng.uniform(0.01, 0.1))
        positions = {lm: tuple(np.round(rng.uniform(0, 1, 3), 6)) for lm in landmarks}
        visibility = {lm: float(np.round(rng.uniform(0, 1), 6)) for lm in landmarks}
        frames.append(LandmarkFrame(timestamp=round(t, 6), positions=positions,
                                    visibility=visibility))
    return LandmarkSeries(frames=frames, frame_rate=30.0, landmarks=tuple(landmarks))


def test_hand_written_file_parses_to_literals(tmp_path):
    path = tmp_path / "tiny.lms"
    path.write_text(
        '{"landmarks": ["nose"], "frame_rate": 30.0}\n'
        "0.000000,0.100000,0.200000,0.000000,1.000000\n"
        "0.033333,0.110000,0.210000,0.000000,0.900000\n"
        "0.066667,0.120000,0.220000,0.000000,0.800000\n"
    )
    series = read_series(path)
    assert len(series) == 3
    assert series.frame_rate == 30.0
    assert series.frames[0].positions[L.NOSE] == (0.1, 0.2, 0.0)
    assert series.frames[2].visibility[L.NOSE] == 0.8
    assert series.frames[1].timestamp == 0.033333


def test_shuffled_lines_name_first_out_of_order_line(tmp_path):
    path = tmp_path / "bad.lms"
    path.write_text(
        '{"landmarks": ["nose"], "frame_rate": 30.0}\n'
        "0.10,0.1,0.2,0.0,1.0\n"
        "0.30,0.1,0.2,0.0,1.0\n"
        "0.20,0.1,0.2,0.0,1.0\n"
    )
    with pytest.raises(ParseError) as err:
        read_series(path)
    assert err.value.line_no == 4


def test_field_count_mismatch_is_an_error(tmp_path):
    path = tmp_path / "short.lms"
    path.write_text('{"landmarks": ["nose"], "frame_rate": 30.0}\n0.1,0.2,0.3\n')
    with pytest.raises(ParseError) as err:
        read_series(path)
    assert err.value.line_no == 2


def test_round_trip_random_series(tmp_path, rng):
    # quantize once on the first write; the second pass must be byte-identical
    for trial in range(5):
        series = _random_series(rng, n_frames=20 + trial)
        p1, p2 = tmp_path / f"a{trial}.lms", tmp_path / f"b{trial}.lms"
        write_series(series, p1)
        back = read_series(p1)
        assert len(back) == len(series)
        for f0, f1 in zip(series.frames, back.frames):
            assert f1.timestamp == pytest.approx(f0.timestamp, abs=1e-6)
            for lm in series.landmarks:
                assert f1.positions[lm] == pytest.approx(f0.positions[lm], abs=1e-6)
        write_series(back, p2)
        assert p1.read_bytes() == p2.read_bytes()


def test_empty_series_writes_header_only(tmp_path):
    series = LandmarkSeries(frames=[], frame_rate=25.0, landmarks=(L.NOSE,))
    path = tmp_path / "empty.lms"
    write_series(series, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 1
    assert read_series(path).frames == []


def test_full_visibility_serializes_as_unity(tmp_path):
    frame = LandmarkFrame(timestamp=0.0, positions={L.NOSE: (0.5, 0.5, 0.0)},
                          visibility={L.NOSE: 1.0})
    series = LandmarkSeries(frames=[frame], frame_rate=30.0, landmarks=(L.NOSE,))
    path = tmp_path / "vis.lms"
    write_series(series, path)
    assert path.read_text().splitlines()[1].endswith(",1.000000")


def test_stream_matches_batch_for_any_chunking(tmp_path, rng):
    series = _random_series(rng, n_frames=40)
    path = tmp_path / "s.lms"
    write_series(series, path)
    batch = read_series(path)
    data = path.read_bytes()
    for _ in range(10):
        cuts = sorted(rng.integers(0, len(data) + 1, size=rng.integers(1, 30)))
        chunks = [data[a:b] for a, b in zip([0] + list(cuts), list(cuts) + [len(data)])]
        streamed = list(open_stream(iter(chunks)))
        assert len(streamed) == len(batch.frames)
        for a, b in zip(streamed, batch.frames):
            assert a == b


def test_empty_stream_yields_no_frames():
    assert list(open_stream(iter([]))) == []


def test_record_split_across_chunks_emits_once():
    header = format_header((L.NOSE,), 30.0).encode() + b"\n"
    record = b"0.000000,0.100000,0.200000,0.000000,1.000000\n"
    stream = open_stream(iter([header + record[:10], record[10:]]))
    frames = list(stream)
    assert len(frames) == 1
    assert frames[0].positions[L.NOSE] == (0.1, 0.2, 0.0)


def test_malformed_record_terminates_stream(tmp_path):
    header = format_header((L.NOSE,), 30.0).encode() + b"\n"
    stream = open_stream(iter([header, b"0.0,oops\n"]))
    with pytest.raises(ParseError):
        list(stream)


def test_iter_file_chunks_round_trip(tmp_path, rng):
    series = _random_series(rng, n_frames=10)
    path = tmp_path / "c.lms"
    write_series(series, path)
    streamed = list(open_stream(iter_file_chunks(path, chunk_size=7)))
    assert len(streamed) == 10
