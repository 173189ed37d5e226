import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from liptraj.errors import NumericDomainError
from liptraj.geometry import apply_pose, reproject_frame, reproject_points, rotation_matrix
from liptraj.openface import PoseParams, RawFrame


def test_identity_pose_leaves_points():
    pts = np.random.default_rng(0).normal(0, 50, size=(68, 3))
    pose = PoseParams(0, 0, 0, 0, 0, 0)
    assert np.array_equal(reproject_points(pts, pose), pts)


def test_pure_translation():
    pose = PoseParams(10, 0, 0, 0, 0, 0)
    out = reproject_points(np.array([[10.0, 0.0, 0.0]]), pose)
    assert np.allclose(out, [[0.0, 0.0, 0.0]], atol=0)


def test_rotation_matches_scipy():
    # Independent oracle: R = Rz·Ry·Rx is the extrinsic x-y-z composition.
    rng = np.random.default_rng(1)
    for _ in range(50):
        rx, ry, rz = rng.uniform(-np.pi, np.pi, size=3)
        ours = rotation_matrix(rx, ry, rz)
        oracle = Rotation.from_euler("xyz", [rx, ry, rz]).as_matrix()
        assert np.allclose(ours, oracle, atol=1e-12)


def test_quarter_turn_round_trip():
    pose = PoseParams(0, 0, 0, 0, 0, np.pi / 2)
    p = np.array([[3.0, 4.0, 5.0]])
    observed = apply_pose(p, pose)
    assert np.allclose(observed, [[-4.0, 3.0, 5.0]], atol=1e-12)
    recovered = reproject_points(observed, pose)
    assert np.allclose(recovered, p, atol=1e-9)


def test_thousand_randomized_round_trips():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        pts = rng.normal(0, 60, size=(68, 3))
        pose = PoseParams(*rng.uniform(-50, 50, size=3), *rng.uniform(-np.pi, np.pi, size=3))
        recovered = reproject_points(apply_pose(pts, pose), pose)
        worst = max(worst, float(np.abs(recovered - pts).max()))
    assert worst <= 1e-9


def test_reproject_frame_uses_frame_pose():
    pts = np.ones((68, 3))
    pose = PoseParams(1, 1, 1, 0, 0, 0)
    frame = RawFrame(0.0, 1.0, True, pose, pts)
    assert np.allclose(reproject_frame(frame), np.zeros((68, 3)), atol=0)


def test_non_finite_pose_rejected():
    pose = PoseParams(np.nan, 0, 0, 0, 0, 0)
    with pytest.raises(NumericDomainError):
        reproject_points(np.zeros((1, 3)), pose)
