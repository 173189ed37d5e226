import numpy as np
import pytest

from liptraj.errors import ConsistencyError, InsufficientDataError, ShapeError
from liptraj.normalize import (
    LIP_INDICES,
    denormalize,
    landmark_set_for_width,
    lips_slice,
    normalize_clip,
    row_width,
    speaker_reference,
    to_storage_precision,
)


def _positions(rng, frames=5):
    return to_storage_precision(rng.normal(0, 40, size=(frames, 68, 3)))


def _reference(rng, speaker="spk0"):
    return speaker_reference(speaker, [rng.normal(0, 40, size=(68, 3)) for _ in range(3)])


def test_row_widths():
    assert row_width("lips") == 60
    assert row_width("all") == 204
    assert landmark_set_for_width(60) == "lips"
    assert landmark_set_for_width(204) == "all"
    assert LIP_INDICES == tuple(range(48, 68))


def test_reference_single_clip_is_first_frame():
    first = np.random.default_rng(0).normal(0, 30, size=(68, 3))
    ref = speaker_reference("s", [first])
    assert np.array_equal(ref.points, to_storage_precision(first))


def test_reference_is_mean():
    a = np.zeros((68, 3))
    b = np.zeros((68, 3))
    a[48, 0] = 1.0
    b[48, 0] = 3.0
    ref = speaker_reference("s", [a, b])
    assert ref.points[48, 0] == 2.0


def test_reference_identical_clips():
    frame = np.random.default_rng(3).normal(size=(68, 3))
    ref = speaker_reference("s", [frame] * 10)
    assert np.allclose(ref.points, to_storage_precision(frame), atol=1e-12)


def test_reference_empty_errors():
    with pytest.raises(InsufficientDataError):
        speaker_reference("s", [])


def test_zero_displacement_for_reference_frame():
    rng = np.random.default_rng(1)
    ref = _reference(rng)
    positions = np.tile(ref.points, (4, 1, 1))
    clip = normalize_clip(positions, ref, "lips", clip_id="c", speaker_id="spk0", token_ids=[0])
    assert np.array_equal(clip.displacements, np.zeros((4, 60)))


@pytest.mark.parametrize("landmark_set,width", [("lips", 60), ("all", 204)])
def test_widths_by_landmark_set(landmark_set, width):
    rng = np.random.default_rng(2)
    ref = _reference(rng)
    clip = normalize_clip(
        _positions(rng), ref, landmark_set, clip_id="c", speaker_id="spk0", token_ids=[1]
    )
    assert clip.displacements.shape == (5, width)
    assert clip.frame_rate == 80.0


def test_normalize_denormalize_bit_exact():
    rng = np.random.default_rng(3)
    ref = _reference(rng)
    for landmark_set in ("lips", "all"):
        positions = _positions(rng, frames=20)
        clip = normalize_clip(
            positions, ref, landmark_set, clip_id="c", speaker_id="spk0", token_ids=[1]
        )
        restored = denormalize(clip.displacements, ref, landmark_set)
        keep = list(range(48, 68)) if landmark_set == "lips" else list(range(68))
        expected = positions[:, keep, :].reshape(20, -1)
        assert np.array_equal(restored, expected)


def test_flattening_order():
    rng = np.random.default_rng(4)
    ref = _reference(rng)
    positions = np.tile(ref.points, (1, 1, 1)).copy()
    positions[0, 48, 2] += 1.0  # z of landmark 48, the first retained lip point
    clip = normalize_clip(positions, ref, "lips", clip_id="c", speaker_id="spk0", token_ids=[1])
    assert clip.displacements[0, 2] == 1.0
    assert np.count_nonzero(clip.displacements) == 1


def test_unit_displacement_denormalizes_to_reference_plus_one():
    rng = np.random.default_rng(5)
    ref = _reference(rng)
    disp = np.zeros((1, 60))
    disp[0, 4] = 1.0  # y of landmark 49
    out = denormalize(disp, ref, "lips")
    expected = ref.points[48:68].reshape(-1).copy()
    expected[4] += 1.0
    assert np.array_equal(out[0], expected)


def test_speaker_mismatch():
    rng = np.random.default_rng(6)
    ref = _reference(rng, speaker="other")
    with pytest.raises(ConsistencyError):
        normalize_clip(_positions(rng), ref, "lips", clip_id="c", speaker_id="spk0", token_ids=[1])


def test_denormalize_width_mismatch():
    rng = np.random.default_rng(7)
    ref = _reference(rng)
    with pytest.raises(ShapeError):
        denormalize(np.zeros((2, 61)), ref, "lips")


def test_lips_slice_matches_lip_columns():
    traj = np.arange(2 * 204, dtype=float).reshape(2, 204)
    sliced = lips_slice(traj)
    assert sliced.shape == (2, 60)
    assert np.array_equal(sliced, traj[:, 48 * 3 : 68 * 3])
