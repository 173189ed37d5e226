"""Reference frames and displacement labels.

After reprojection and resampling, every clip is reduced to displacements
from a per-speaker reference face: the coordinate-wise average of the first
frame of each of the speaker's clips. Training on displacements rather than
absolute positions is what lets one decoder serve multiple speakers; at
inference the reference is added back to recover absolute trajectories.

Precision contract: positions entering this stage are quantized to float32
values (the storage precision of the dataset container) and all arithmetic
here runs in float64. A difference of two float32-valued numbers at
millimeter scale is exact in float64, so ``denormalize(normalize(x)) == x``
holds bit for bit, which downstream tests rely on.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, InsufficientDataError, ShapeError
from .openface import NUM_LANDMARKS

# Outer (48-59) plus inner (60-67) lip ring of the 68-point annotation.
LIP_START = 48
LIP_COUNT = 20
LIP_INDICES = tuple(range(LIP_START, LIP_START + LIP_COUNT))

LANDMARK_SETS = {
    "lips": LIP_INDICES,
    "all": tuple(range(NUM_LANDMARKS)),
}

FRAME_RATE = 80.0


def landmark_indices(landmark_set):
    try:
        return LANDMARK_SETS[landmark_set]
    except KeyError:
        raise ShapeError(
            f"unknown landmark set {landmark_set!r}; expected one of {sorted(LANDMARK_SETS)}"
        ) from None


def row_width(landmark_set):
    """Flattened row width: 3 coordinates per retained landmark (60 or 204)."""
    return 3 * len(landmark_indices(landmark_set))


def landmark_set_for_width(width):
    for name in LANDMARK_SETS:
        if row_width(name) == width:
            return name
    raise ShapeError(f"no landmark set has row width {width}")


def to_storage_precision(array):
    """Round float64 values onto the float32 grid, keeping float64 dtype."""
    return np.asarray(array, dtype=np.float64).astype(np.float32).astype(np.float64)


@dataclass
class ReferenceFrame:
    """Per-speaker resting face: 68 reprojected positions in millimeters."""

    speaker_id: str
    points: np.ndarray  # (68, 3) float64, float32-valued

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.shape != (NUM_LANDMARKS, 3):
            raise ShapeError(f"reference must be (68, 3), got {self.points.shape}")


@dataclass
class NormalizedClip:
    """One training item: token ids plus an 80 fps displacement trajectory."""

    clip_id: str
    speaker_id: str
    token_ids: list
    displacements: np.ndarray  # (num_frames, 3*K) float64, millimeters
    reference: ReferenceFrame
    landmark_set: str
    frame_rate: float = FRAME_RATE

    @property
    def num_frames(self):
        return self.displacements.shape[0]

    @property
    def width(self):
        return self.displacements.shape[1]


def speaker_reference(speaker_id, first_frames):
    """Average the initial frames of all of one speaker's accepted clips.

    ``first_frames`` is a sequence of (68, 3) reprojected, resampled position
    arrays (one per clip). The mean is rounded to storage precision so the
    reference subtracts and adds back exactly.
    """
    if len(first_frames) == 0:
        raise InsufficientDataError(f"no clips for speaker {speaker_id!r}")
    stack = np.stack([np.asarray(f, dtype=np.float64) for f in first_frames])
    if stack.shape[1:] != (NUM_LANDMARKS, 3):
        raise ShapeError(f"first frames must be (68, 3), got {stack.shape[1:]}")
    return ReferenceFrame(speaker_id=speaker_id, points=to_storage_precision(stack.mean(axis=0)))


def _flatten(positions):
    # (F, K, 3) -> (F, 3K) with per-landmark (x, y, z) runs, landmarks ascending
    return positions.reshape(positions.shape[0], -1)


def normalize_clip(positions, reference, landmark_set, *, clip_id, speaker_id, token_ids):
    """Turn absolute positions into a :class:`NormalizedClip`.

    ``positions`` is (num_frames, 68, 3), already reprojected, resampled and
    storage-quantized. Retains the landmarks of ``landmark_set`` ('lips': 20
    points, row width 60; 'all': 68 points, width 204) and subtracts the
    reference coordinate-wise.
    """
    if reference.speaker_id != speaker_id:
        raise ConsistencyError(
            f"reference belongs to speaker {reference.speaker_id!r}, clip to {speaker_id!r}"
        )
    positions = np.asarray(positions, dtype=np.float64)
    if positions.ndim != 3 or positions.shape[1:] != (NUM_LANDMARKS, 3):
        raise ShapeError(f"positions must be (frames, 68, 3), got {positions.shape}")
    keep = list(landmark_indices(landmark_set))
    displacements = _flatten(positions[:, keep, :] - reference.points[keep, :])
    return NormalizedClip(
        clip_id=clip_id,
        speaker_id=speaker_id,
        token_ids=list(token_ids),
        displacements=displacements,
        reference=reference,
        landmark_set=landmark_set,
    )


def denormalize(displacements, reference, landmark_set):
    """Exact inverse of :func:`normalize_clip` on the retained landmarks.

    Returns absolute positions of shape (num_frames, 3*K).
    """
    displacements = np.asarray(displacements, dtype=np.float64)
    width = row_width(landmark_set)
    if displacements.ndim != 2 or displacements.shape[1] != width:
        raise ShapeError(
            f"displacements must have row width {width} for {landmark_set!r}, "
            f"got shape {displacements.shape}"
        )
    keep = list(landmark_indices(landmark_set))
    return displacements + reference.points[keep, :].reshape(-1)


def lips_slice(displacements):
    """Columns of the 20 lip landmarks out of a width-204 trajectory."""
    displacements = np.asarray(displacements)
    if displacements.shape[1] != 3 * NUM_LANDMARKS:
        raise ShapeError(f"expected width {3 * NUM_LANDMARKS}, got {displacements.shape[1]}")
    return displacements[:, 3 * LIP_START : 3 * (LIP_START + LIP_COUNT)]
