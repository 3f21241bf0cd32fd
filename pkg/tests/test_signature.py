import cmath

import numpy as np
import pytest

from formsense.engine import RolloutError
from formsense.model import LandmarkId
from formsense.signature import (
    FREQUENCY_GRID,
    GRID_POINTS,
    dtft_at,
    feature_names,
    save_rows,
    signature,
    stack_features,
)

L = LandmarkId


def naive_dtft(x, omega):
    return sum(v * cmath.exp(-1j * omega * n) for n, v in enumerate(x))


def _error(per_landmark, landmarks=(L.NOSE, L.LEFT_HIP)):
    per_landmark = np.asarray(per_landmark, dtype=float)
    return RolloutError.from_series(landmarks, per_landmark)


def test_dtft_zero_signal():
    assert dtft_at([0.0, 0.0, 0.0], 1.234) == 0.0


def test_dtft_single_sample():
    v = dtft_at([1.0], 0.777)
    assert v == pytest.approx(1.0 + 0.0j)
    assert abs(v) == 1.0 and cmath.phase(v) == 0.0


def test_dtft_matches_naive_sum(rng):
    x = rng.standard_normal(50)
    for omega in (0.0, np.pi / 3, np.pi, 2.1):
        assert dtft_at(x, omega) == pytest.approx(naive_dtft(x, omega), abs=1e-10)


def test_dtft_rejects_empty():
    with pytest.raises(ValueError):
        dtft_at([], 0.5)


def test_dtft_linearity(rng):
    x = rng.standard_normal(30)
    y = rng.standard_normal(30)
    for omega in FREQUENCY_GRID:
        lhs = dtft_at(2.5 * x - 1.5 * y, omega)
        rhs = 2.5 * dtft_at(x, omega) - 1.5 * dtft_at(y, omega)
        assert lhs == pytest.approx(rhs, abs=1e-10)


def test_signature_zero_series_is_all_zero():
    sig = signature(_error(np.zeros((2, 17))))
    assert np.all(sig.values == 0.0)
    assert len(sig) == 22 * 2


def test_signature_constant_series_dc():
    c, t = 0.37, 25
    sig = signature(_error(np.full((1, t), c), landmarks=(L.NOSE,)))
    amps, phases = sig.values[:GRID_POINTS], sig.values[GRID_POINTS:]
    assert amps[0] == pytest.approx(c * t, rel=1e-12)
    assert phases[0] == pytest.approx(0.0, abs=1e-12)


def test_signature_length_is_duration_independent(rng):
    for t in (5, 17, 90):
        sig = signature(_error(rng.uniform(0, 1, size=(2, t))))
        assert len(sig) == 22 * 2
        assert sig.grid_tag == "pi-grid-11"


def test_signature_matches_naive_oracle(rng):
    series = rng.uniform(0, 0.2, size=(3, 33))
    sig = signature(_error(series, landmarks=(L.NOSE, L.LEFT_HIP, L.RIGHT_HIP)))
    for lm_idx in range(3):
        for k, omega in enumerate(FREQUENCY_GRID):
            ref = naive_dtft(series[lm_idx], omega)
            base = lm_idx * 22
            assert sig.values[base + k] == pytest.approx(abs(ref), abs=1e-10)
            assert sig.values[base + GRID_POINTS + k] == pytest.approx(
                cmath.phase(ref), abs=1e-10)


def test_signature_phases_in_half_open_interval(rng):
    series = rng.standard_normal((4, 40)) ** 2
    sig = signature(_error(series, landmarks=(L.NOSE,) * 4))
    phases = sig.values.reshape(4, 22)[:, GRID_POINTS:]
    assert np.all(phases > -np.pi)
    assert np.all(phases <= np.pi)


def test_zero_padding_preserves_dc(rng):
    x = rng.uniform(0, 1, 20)
    padded = np.concatenate([x, np.zeros(13)])
    assert abs(dtft_at(x, 0.0)) == pytest.approx(abs(dtft_at(padded, 0.0)), abs=1e-12)


def test_feature_names_and_rows(tmp_path, rng):
    sigs = [signature(_error(rng.uniform(0, 1, size=(2, 9)))) for _ in range(3)]
    names = feature_names(sigs[0].landmarks)
    assert len(names) == 44
    assert names[0] == "nose_amp_0" and names[21] == "nose_phase_10"
    path = tmp_path / "rows.csv"
    save_rows(path, sigs, labels=[0, 1, 0])
    lines = path.read_text().splitlines()
    assert lines[0].split(",")[:2] == ["label", "nose_amp_0"]
    assert len(lines) == 4
    feats = stack_features(sigs)
    assert feats.shape == (3, 44)
