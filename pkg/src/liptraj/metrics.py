"""Quantitative trajectory evaluation.

The headline metric is the Manhattan distance between predicted and ground
truth coordinates: per frame, the sum of absolute coordinate differences in
millimeters. The report also breaks the error down per landmark and per
axis so claims like "N mm average error" can be situated precisely.

Sequences of different lengths are compared over their overlap with an
explicit note; trajectory alignment is out of scope.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ShapeError
from .normalize import NUM_LANDMARKS, lips_slice


@dataclass
class ErrorReport:
    label: str
    mean_manhattan_per_frame: float   # mm
    per_landmark_mae: np.ndarray      # (K,) mm, mean |diff| per landmark
    per_axis_mae: np.ndarray          # (3,) mm
    frames_compared: int
    length_note: str = ""

    @property
    def mean_landmark_mae(self):
        return float(self.per_landmark_mae.mean())

    def to_dict(self):
        return {
            "label": self.label,
            "mean_manhattan_per_frame_mm": self.mean_manhattan_per_frame,
            "mean_per_landmark_mae_mm": self.mean_landmark_mae,
            "per_landmark_mae_mm": self.per_landmark_mae.tolist(),
            "per_axis_mae_mm": self.per_axis_mae.tolist(),
            "frames_compared": self.frames_compared,
            "length_note": self.length_note,
        }


def manhattan_error(pred, truth, label="model"):
    """Compare two (frames, 3K) trajectories in millimeters."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.ndim != 2 or truth.ndim != 2:
        raise ShapeError("trajectories must be 2-D (frames, coords)")
    if pred.shape[1] != truth.shape[1]:
        raise ShapeError(
            f"trajectory widths differ: {pred.shape[1]} vs {truth.shape[1]}"
        )
    if pred.shape[1] % 3 != 0:
        raise ShapeError(f"width {pred.shape[1]} is not a multiple of 3")
    overlap = min(pred.shape[0], truth.shape[0])
    if overlap == 0:
        raise ContractError("no overlapping frames to compare")
    note = ""
    if pred.shape[0] != truth.shape[0]:
        note = (
            f"lengths differ (pred {pred.shape[0]}, truth {truth.shape[0]}); "
            f"compared first {overlap} frames"
        )
    diff = np.abs(pred[:overlap] - truth[:overlap])
    landmarks = pred.shape[1] // 3
    per_lm = diff.reshape(overlap, landmarks, 3)
    return ErrorReport(
        label=label,
        mean_manhattan_per_frame=float(diff.sum(axis=1).mean()),
        per_landmark_mae=per_lm.mean(axis=(0, 2)),
        per_axis_mae=per_lm.mean(axis=(0, 1)),
        frames_compared=overlap,
        length_note=note,
    )


@dataclass
class ComparisonReport:
    reports: list = field(default_factory=list)

    def to_table(self):
        lines = ["label\tmanhattan_mm_per_frame\tmean_landmark_mae_mm\tframes\tnote"]
        for r in self.reports:
            lines.append(
                f"{r.label}\t{r.mean_manhattan_per_frame!r}\t"
                f"{r.mean_landmark_mae!r}\t{r.frames_compared}\t{r.length_note}"
            )
        return "\n".join(lines) + "\n"

    def to_dict(self):
        return {"models": [r.to_dict() for r in self.reports]}


def _reconcile_width(traj, width):
    """Slice a 68-landmark trajectory down to lips when widths mix."""
    traj = np.asarray(traj, dtype=np.float64)
    if traj.shape[1] == width:
        return traj, False
    if traj.shape[1] == 3 * NUM_LANDMARKS and width == 60:
        return lips_slice(traj), True
    raise ShapeError(
        f"cannot reconcile trajectory width {traj.shape[1]} with {width}"
    )


def compare_report(outputs, truth, labels=None):
    """Evaluate several model trajectories against one ground truth.

    Widths are reconciled onto the narrowest common landmark set: a 68-point
    trajectory is sliced to its 20 lip landmarks when compared against a
    lips-only one, so rows stay comparable.
    """
    if not outputs:
        raise ContractError("compare_report needs at least one model output")
    labels = labels or [f"model{i}" for i in range(len(outputs))]
    if len(labels) != len(outputs):
        raise ContractError("labels and outputs differ in count")
    truth = np.asarray(truth, dtype=np.float64)
    widths = [np.asarray(o).shape[1] for o in outputs] + [truth.shape[1]]
    target_width = min(widths)
    truth_r, truth_sliced = _reconcile_width(truth, target_width)
    report = ComparisonReport()
    for label, out in zip(labels, outputs):
        out_r, sliced = _reconcile_width(out, target_width)
        r = manhattan_error(out_r, truth_r, label=label)
        if sliced or truth_sliced:
            extra = "compared on the 20-landmark lip set"
            r.length_note = f"{r.length_note}; {extra}" if r.length_note else extra
        report.reports.append(r)
    return report
