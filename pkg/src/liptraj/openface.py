"""Ingestion of OpenFace 2.0 landmark CSV output and LRS3-style transcripts.

OpenFace writes one CSV per video with a header line and one row per frame.
We consume the columns carrying the frame timestamp, the tracker's
confidence/success flags, the six rigid head-pose parameters and the 68
3D landmark positions (``X_0..X_67, Y_0..Y_67, Z_0..Z_67``, millimeters in
camera/world coordinates). Column order is free and unknown columns are
ignored, which keeps the parser robust across OpenFace versions and the
action-unit columns it may or may not emit.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ContractError,
    EmptyInputError,
    FormatError,
    ParseError,
)

NUM_LANDMARKS = 68

POSE_COLUMNS = ("pose_Tx", "pose_Ty", "pose_Tz", "pose_Rx", "pose_Ry", "pose_Rz")
META_COLUMNS = ("frame", "face_id", "timestamp", "confidence", "success")


@dataclass(frozen=True)
class PoseParams:
    """Rigid head pose: translation in millimeters, rotation in radians."""

    tx: float
    ty: float
    tz: float
    rx: float
    ry: float
    rz: float

    def translation(self):
        return np.array([self.tx, self.ty, self.tz], dtype=np.float64)

    def angles(self):
        return np.array([self.rx, self.ry, self.rz], dtype=np.float64)

    def is_finite(self):
        return bool(np.all(np.isfinite([self.tx, self.ty, self.tz, self.rx, self.ry, self.rz])))


@dataclass
class RawFrame:
    """One tracked video frame: 68 3D landmarks plus tracker metadata."""

    timestamp: float
    confidence: float
    success: bool
    pose: PoseParams
    points: np.ndarray  # (68, 3) float64, millimeters

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.shape != (NUM_LANDMARKS, 3):
            raise FormatError(
                f"frame must carry {NUM_LANDMARKS} 3D points, got shape {self.points.shape}"
            )


@dataclass
class ClipRecord:
    """A transcribed clip: text plus its per-frame landmark track."""

    clip_id: str
    speaker_id: str
    transcript: str
    source_fps: float
    frames: list = field(default_factory=list)


@dataclass
class FilterResult:
    """Outcome of confidence filtering one clip."""

    clip: ClipRecord
    offending: list  # frame indices that failed the check
    threshold: float

    @property
    def accepted(self):
        return not self.offending


def _landmark_columns():
    cols = []
    for axis in "XYZ":
        cols.extend(f"{axis}_{i}" for i in range(NUM_LANDMARKS))
    return tuple(cols)


LANDMARK_COLUMNS = _landmark_columns()
REQUIRED_COLUMNS = META_COLUMNS + POSE_COLUMNS + LANDMARK_COLUMNS


def parse_openface_csv(data):
    """Parse OpenFace CSV bytes (or text) into a list of :class:`RawFrame`.

    Raises :class:`FormatError` naming the first missing required column,
    :class:`ParseError` with row/column context for non-numeric cells, and
    :class:`EmptyInputError` when the file has a header but no data rows.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    reader = csv.reader(io.StringIO(data))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyInputError("empty CSV: no header line") from None
    names = [h.strip() for h in header]
    position = {name: i for i, name in enumerate(names)}
    for col in REQUIRED_COLUMNS:
        if col not in position:
            raise FormatError(f"missing required column {col!r}")

    def cell(row, col, rownum, as_float=float):
        raw = row[position[col]].strip()
        try:
            return as_float(raw)
        except ValueError:
            raise ParseError(f"non-numeric value {raw!r}", row=rownum, column=col) from None

    frames = []
    for rownum, row in enumerate(reader, start=2):  # header is line 1
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < len(names):
            raise ParseError(
                f"expected {len(names)} cells, got {len(row)}", row=rownum, column=None
            )
        pose = PoseParams(*(cell(row, c, rownum) for c in POSE_COLUMNS))
        points = np.empty((NUM_LANDMARKS, 3), dtype=np.float64)
        for ax, axis in enumerate("XYZ"):
            for i in range(NUM_LANDMARKS):
                points[i, ax] = cell(row, f"{axis}_{i}", rownum)
        frames.append(
            RawFrame(
                timestamp=cell(row, "timestamp", rownum),
                confidence=cell(row, "confidence", rownum),
                success=cell(row, "success", rownum) != 0,
                pose=pose,
                points=points,
            )
        )
    if not frames:
        raise EmptyInputError("CSV has a header but no data rows")
    return frames


def parse_transcript(data):
    """Extract the utterance from an LRS3-style transcript file.

    The first line starting with ``Text:`` carries the spoken words. The
    result is uppercased with runs of whitespace collapsed to single spaces.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    for line in data.splitlines():
        if line.startswith("Text:"):
            utterance = line[len("Text:"):]
            return " ".join(utterance.upper().split())
    raise FormatError("transcript has no 'Text:' line")


def estimate_fps(frames):
    """Median frame rate implied by the timestamps, for bookkeeping."""
    if len(frames) < 2:
        return 0.0
    ts = np.array([f.timestamp for f in frames], dtype=np.float64)
    deltas = np.diff(ts)
    deltas = deltas[deltas > 0]
    if deltas.size == 0:
        return 0.0
    return float(1.0 / np.median(deltas))


def filter_clip(clip, threshold=0.7):
    """Accept or reject a whole clip on tracker confidence.

    A clip passes only if every frame has ``success`` set and confidence at
    or above ``threshold``. Rejection is clip-level: dropping individual
    frames would corrupt the time base, and a single misaligned frame means
    the tracker lost the face for that take.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ContractError(f"threshold must lie in [0, 1], got {threshold}")
    offending = [
        i
        for i, f in enumerate(clip.frames)
        if not f.success or f.confidence < threshold
    ]
    return FilterResult(clip=clip, offending=offending, threshold=threshold)
