import numpy as np
import pytest

from liptraj.errors import FormatError, InsufficientDataError
from liptraj.resample import FRAME_RATE, resample_80fps


def test_already_on_grid_is_identity():
    n = 41
    ts = np.arange(n) / FRAME_RATE
    values = np.random.default_rng(0).normal(size=(n, 68, 3))
    grid, out = resample_80fps(ts, values)
    assert np.array_equal(grid, ts)
    assert np.array_equal(out, values)


def test_linear_midpoint():
    ts = np.array([0.0, 0.025])  # 40 fps source
    values = np.array([[0.0], [1.0]])
    grid, out = resample_80fps(ts, values)
    assert np.allclose(grid, [0.0, 0.0125, 0.025])
    assert np.allclose(out[:, 0], [0.0, 0.5, 1.0])


def test_constant_preserved_at_any_fps():
    ts = np.array([0.0, 0.033, 0.071, 0.1, 0.17])
    values = np.full((5, 4), 3.25)
    _, out = resample_80fps(ts, values)
    assert np.array_equal(out, np.full((out.shape[0], 4), 3.25))


def test_affine_in_time_reproduced_exactly():
    ts = np.linspace(0.0, 1.0, 31)  # 30 fps
    values = (2.0 * ts + 0.5)[:, None]
    grid, out = resample_80fps(ts, values)
    assert np.allclose(out[:, 0], 2.0 * grid + 0.5, atol=1e-12)


def test_first_output_equals_first_input():
    ts = np.array([0.4, 0.47, 0.53])
    values = np.random.default_rng(1).normal(size=(3, 2))
    grid, out = resample_80fps(ts, values)
    assert grid[0] == ts[0]
    assert np.array_equal(out[0], values[0])


def test_too_few_frames():
    with pytest.raises(InsufficientDataError):
        resample_80fps(np.array([0.0]), np.zeros((1, 3)))


def test_non_monotonic_timestamps():
    with pytest.raises(FormatError):
        resample_80fps(np.array([0.0, 0.05, 0.04]), np.zeros((3, 2)))
