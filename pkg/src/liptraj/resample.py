"""Time-base normalization: linear resampling onto the 80 fps grid.

Source videos come at 24/25/30/60 fps; the decoder emits one frame every
12.5 ms, so all label trajectories are interpolated to exactly 80 frames
per second before anything else uses them.
"""

import numpy as np

from .errors import FormatError, InsufficientDataError

FRAME_RATE = 80.0
FRAME_INTERVAL_MS = 1000.0 / FRAME_RATE  # 12.5


def resample_80fps(timestamps, values):
    """Linearly interpolate ``values`` onto the 80 fps grid.

    Parameters
    ----------
    timestamps : (N,) array of strictly increasing times in seconds.
    values : (N, ...) array; each trailing coordinate is interpolated
        independently between its bracketing source frames.

    Returns
    -------
    (grid, resampled) where ``grid[k] = t0 + k / 80`` for
    ``k = 0 .. floor((t_end - t0) * 80)``. The first output sample always
    equals the first input sample.
    """
    timestamps = np.asarray(timestamps, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if timestamps.ndim != 1 or values.shape[0] != timestamps.shape[0]:
        raise FormatError(
            f"timestamps {timestamps.shape} do not index values {values.shape}"
        )
    if timestamps.shape[0] < 2:
        raise InsufficientDataError("resampling needs at least 2 frames")
    if np.any(np.diff(timestamps) <= 0):
        raise FormatError("timestamps must be strictly increasing")

    t0 = timestamps[0]
    span = timestamps[-1] - t0
    # Guard the count against the span*80 product landing one ulp under an
    # integer when the source is already on the grid.
    count = int(np.floor(span * FRAME_RATE + 1e-9)) + 1
    grid = t0 + np.arange(count, dtype=np.float64) / FRAME_RATE

    flat = values.reshape(values.shape[0], -1)
    out = np.empty((count, flat.shape[1]), dtype=np.float64)
    for j in range(flat.shape[1]):
        out[:, j] = np.interp(grid, timestamps, flat[:, j])
    return grid, out.reshape((count,) + values.shape[1:])
