"""Trajectory export: CSV for round-trippable numbers, SVG frames for eyes.

CSV rows are absolute millimeter positions (displacements are denormalized
against the reference before writing) with the original 68-scheme landmark
index in the second column. Floats are written with ``repr`` so re-importing
reproduces the array bit for bit.
"""

import os

import numpy as np

from .errors import FormatError, UsageError
from .normalize import denormalize, landmark_indices, landmark_set_for_width

TRAJECTORY_HEADER = "frame,landmark,x_mm,y_mm,z_mm"

FORMATS = ("csv", "svg-frames")


def trajectory_to_csv(displacements, reference):
    """Render a displacement trajectory as an absolute-position CSV string."""
    displacements = np.asarray(displacements, dtype=np.float64)
    landmark_set = landmark_set_for_width(displacements.shape[1])
    positions = denormalize(displacements, reference, landmark_set)
    indices = landmark_indices(landmark_set)
    lines = [TRAJECTORY_HEADER]
    for f in range(positions.shape[0]):
        row = positions[f].reshape(-1, 3)
        for k, lm in enumerate(indices):
            x, y, z = row[k]
            lines.append(f"{f},{lm},{x!r},{y!r},{z!r}")
    return "\n".join(lines) + "\n"


def read_trajectory_csv(text):
    """Parse a trajectory CSV back into (positions, landmark_index_list).

    Positions come back as (frames, 3K) float64, bit-identical to what
    :func:`trajectory_to_csv` wrote.
    """
    lines = [ln for ln in text.splitlines() if ln]
    if not lines or lines[0] != TRAJECTORY_HEADER:
        raise FormatError("trajectory CSV missing expected header")
    frames = {}
    landmarks_seen = []
    for ln in lines[1:]:
        f_str, lm_str, x, y, z = ln.split(",")
        f = int(f_str)
        lm = int(lm_str)
        frames.setdefault(f, []).append((lm, float(x), float(y), float(z)))
        if f == 0:
            landmarks_seen.append(lm)
    n_frames = max(frames) + 1
    k = len(landmarks_seen)
    out = np.empty((n_frames, 3 * k), dtype=np.float64)
    for f in range(n_frames):
        rows = frames.get(f)
        if rows is None or len(rows) != k:
            raise FormatError(f"trajectory CSV frame {f} is incomplete")
        for j, (_, x, y, z) in enumerate(rows):
            out[f, 3 * j : 3 * j + 3] = (x, y, z)
    return out, landmarks_seen


def _frame_svg(points, lip_flags, bounds):
    x0, y0, x1, y1 = bounds
    pad = 6.0
    width = (x1 - x0) + 2 * pad
    height = (y1 - y0) + 2 * pad
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="{x0 - pad:.2f} {y0 - pad:.2f} {width:.2f} {height:.2f}">',
        f'<rect x="{x0 - pad:.2f}" y="{y0 - pad:.2f}" width="{width:.2f}" '
        f'height="{height:.2f}" fill="white"/>',
    ]
    for (x, y, _z), is_lip in zip(points, lip_flags):
        color = "#c0392b" if is_lip else "#7f8c8d"
        radius = 1.4 if is_lip else 1.0
        parts.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="{radius}" fill="{color}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def export_trajectory(displacements, reference, fmt, out_path):
    """Write a trajectory to disk; returns the list of files created.

    ``csv`` writes one file at ``out_path``. ``svg-frames`` treats
    ``out_path`` as a directory and writes ``frame_0000.svg`` per frame,
    X/Y orthographic projection, lip landmarks drawn in red.
    """
    if fmt not in FORMATS:
        raise UsageError(f"unknown export format {fmt!r}; expected one of {FORMATS}")
    displacements = np.asarray(displacements, dtype=np.float64)
    landmark_set = landmark_set_for_width(displacements.shape[1])
    if fmt == "csv":
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(trajectory_to_csv(displacements, reference))
        return [out_path]

    positions = denormalize(displacements, reference, landmark_set)
    indices = landmark_indices(landmark_set)
    lip_flags = [48 <= lm < 68 for lm in indices]
    pts = positions.reshape(positions.shape[0], -1, 3)
    bounds = (
        float(pts[:, :, 0].min()),
        float(pts[:, :, 1].min()),
        float(pts[:, :, 0].max()),
        float(pts[:, :, 1].max()),
    )
    os.makedirs(out_path, exist_ok=True)
    files = []
    for f in range(pts.shape[0]):
        path = os.path.join(out_path, f"frame_{f:04d}.svg")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(_frame_svg(pts[f], lip_flags, bounds))
        files.append(path)
    return files
