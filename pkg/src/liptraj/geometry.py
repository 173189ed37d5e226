"""Rigid head-pose geometry.

Landmarks arrive in camera/world coordinates where the head is translated
and rotated by its estimated pose. Removing that rigid transform makes the
coordinates invariant to head movement so the model only has to learn
articulation, not pose.

Convention: the forward pose maps a canonical (pose-free) point ``p`` to the
observed point ``p' = R @ p + T`` with ``R = Rz @ Ry @ Rx`` (right-handed
axes, angles in radians, applied X first). Reprojection inverts it exactly:
``p = R.T @ (p' - T)``. The inverse pair is what matters; the composition
order itself is a documented choice so fixtures stay portable.
"""

import numpy as np

from .errors import NumericDomainError


def rotation_matrix(rx, ry, rz):
    """Rotation ``Rz @ Ry @ Rx`` as a (3, 3) float64 matrix."""
    cx, sx = np.cos(rx), np.sin(rx)
    cy, sy = np.cos(ry), np.sin(ry)
    cz, sz = np.cos(rz), np.sin(rz)
    rot_x = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]], dtype=np.float64)
    rot_y = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]], dtype=np.float64)
    rot_z = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]], dtype=np.float64)
    return rot_z @ rot_y @ rot_x


def apply_pose(points, pose):
    """Forward transform: canonical points -> observed points.

    Used by the synthetic corpus generator and by round-trip tests;
    the data pipeline itself only ever inverts poses.
    """
    points = np.asarray(points, dtype=np.float64)
    rot = rotation_matrix(pose.rx, pose.ry, pose.rz)
    return points @ rot.T + pose.translation()


def reproject_points(points, pose):
    """Inverse transform: observed points -> pose-invariant points."""
    if not pose.is_finite():
        raise NumericDomainError(f"non-finite pose parameters: {pose}")
    points = np.asarray(points, dtype=np.float64)
    rot = rotation_matrix(pose.rx, pose.ry, pose.rz)
    return (points - pose.translation()) @ rot


def reproject_frame(frame):
    """Pose-invariant positions of one :class:`~liptraj.openface.RawFrame`."""
    return reproject_points(frame.points, frame.pose)
