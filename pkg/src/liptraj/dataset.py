"""Dataset assembly and the LTDS1 container format.

``build_dataset`` runs the whole label pipeline over a corpus directory
(parse -> confidence filter -> reproject -> resample -> per-speaker
reference -> normalize -> tokenize), assigns a seeded train/validation
split and serializes everything into a single versioned binary file.
Per-clip failures land in a rejection report instead of aborting the build;
only an empty result is fatal.

LTDS1 layout (little-endian throughout)::

    magic b"LTDS1" | u32 version | u16 charset_len + utf8 | u64 split_seed
    u8 landmark_set (0=lips, 1=all) | u32 n_clips
    per clip:
      u16 len + clip_id | u16 len + speaker_id | u8 split (0=train, 1=val)
      u32 n_tokens + n_tokens * u16
      68*3 f32 reference points (landmark-major x,y,z)
      u32 n_frames | u32 width | n_frames*width f32 row-major
"""

import io
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, InsufficientDataError, LiptrajError
from .geometry import reproject_frame
from .normalize import (
    NormalizedClip,
    ReferenceFrame,
    normalize_clip,
    row_width,
    speaker_reference,
    to_storage_precision,
)
from .openface import (
    NUM_LANDMARKS,
    estimate_fps,
    filter_clip,
    parse_openface_csv,
    parse_transcript,
    ClipRecord,
)
from .resample import resample_80fps
from .text import CHARSET, encode_text

MAGIC = b"LTDS1"
VERSION = 1
_SET_CODES = {"lips": 0, "all": 1}
_SET_NAMES = {v: k for k, v in _SET_CODES.items()}


@dataclass
class BuildConfig:
    """Knobs of the label pipeline."""

    confidence_threshold: float = 0.7
    landmark_set: str = "lips"
    split_seed: int = 0
    val_fraction: float = 0.15
    charset: str = CHARSET


@dataclass
class RejectionReport:
    """Per-clip failures collected during a build."""

    rejected: list = field(default_factory=list)  # (clip_id, reason) pairs

    def add(self, clip_id, reason):
        self.rejected.append((clip_id, reason))

    def __len__(self):
        return len(self.rejected)

    def to_text(self):
        if not self.rejected:
            return "no clips rejected\n"
        return "".join(f"{cid}\t{reason}\n" for cid, reason in self.rejected)


@dataclass
class Dataset:
    """Immutable set of normalized clips plus the split assignment."""

    clips: list  # NormalizedClip, file order
    charset: str
    split_seed: int
    landmark_set: str
    split: dict  # clip_id -> "train" | "val"

    def train_clips(self):
        return [c for c in self.clips if self.split[c.clip_id] == "train"]

    def val_clips(self):
        return [c for c in self.clips if self.split[c.clip_id] == "val"]

    @property
    def width(self):
        return row_width(self.landmark_set)


def read_manifest(path):
    """Parse a ``clip_id<TAB>speaker_id`` manifest file."""
    mapping = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(f"speakers manifest line {lineno} is not 'clip<TAB>speaker'")
            mapping[parts[0]] = parts[1]
    if not mapping:
        raise FormatError("speakers manifest is empty")
    return mapping


def assign_split(clip_ids, seed, val_fraction):
    """Deterministic train/validation partition with at least one clip each."""
    if len(clip_ids) < 2:
        raise InsufficientDataError("need at least 2 clips to split")
    rng = np.random.default_rng([int(seed), 0x5B11])
    order = list(rng.permutation(len(clip_ids)))
    n_val = int(round(val_fraction * len(clip_ids)))
    n_val = min(max(n_val, 1), len(clip_ids) - 1)
    val_ids = {clip_ids[i] for i in order[:n_val]}
    return {cid: ("val" if cid in val_ids else "train") for cid in clip_ids}


def build_dataset(root_dir, config=None, out_path=None):
    """Run the full pipeline over a corpus directory.

    Returns ``(dataset, report)``; when ``out_path`` is given the dataset is
    also serialized there. Raises :class:`InsufficientDataError` if no clip
    survives filtering.
    """
    config = config or BuildConfig()
    manifest = read_manifest(os.path.join(root_dir, "speakers.tsv"))
    clip_ids = sorted(manifest)
    report = RejectionReport()

    # Stage 1: parse + filter + reproject + resample + quantize.
    prepared = {}  # clip_id -> (speaker, tokens, positions (F,68,3))
    for cid in clip_ids:
        try:
            with open(os.path.join(root_dir, f"{cid}.csv"), "rb") as fh:
                frames = parse_openface_csv(fh.read())
            with open(os.path.join(root_dir, f"{cid}.txt"), "rb") as fh:
                transcript = parse_transcript(fh.read())
            if not transcript:
                raise FormatError("empty transcript")
            clip = ClipRecord(
                clip_id=cid,
                speaker_id=manifest[cid],
                transcript=transcript,
                source_fps=estimate_fps(frames),
                frames=frames,
            )
            result = filter_clip(clip, config.confidence_threshold)
            if not result.accepted:
                bad = ", ".join(str(i) for i in result.offending[:8])
                report.add(cid, f"low-confidence frames: {bad}")
                continue
            tokens = encode_text(transcript, config.charset)
            timestamps = np.array([f.timestamp for f in frames])
            reprojected = np.stack([reproject_frame(f) for f in frames])
            _, resampled = resample_80fps(timestamps, reprojected)
            prepared[cid] = (manifest[cid], tokens, to_storage_precision(resampled))
        except LiptrajError as exc:
            report.add(cid, f"{type(exc).__name__}: {exc}")
        except OSError as exc:
            report.add(cid, f"missing file: {exc}")

    if not prepared:
        raise InsufficientDataError("zero clips survive the pipeline")

    # Stage 2: per-speaker references from first resampled frames.
    by_speaker = {}
    for cid, (speaker, _, positions) in prepared.items():
        by_speaker.setdefault(speaker, []).append(positions[0])
    references = {
        speaker: speaker_reference(speaker, firsts)
        for speaker, firsts in sorted(by_speaker.items())
    }

    # Stage 3: normalize + split.
    surviving = sorted(prepared)
    split = assign_split(surviving, config.split_seed, config.val_fraction)
    clips = []
    for cid in surviving:
        speaker, tokens, positions = prepared[cid]
        clips.append(
            normalize_clip(
                positions,
                references[speaker],
                config.landmark_set,
                clip_id=cid,
                speaker_id=speaker,
                token_ids=tokens,
            )
        )
    dataset = Dataset(
        clips=clips,
        charset=config.charset,
        split_seed=config.split_seed,
        landmark_set=config.landmark_set,
        split=split,
    )
    if out_path is not None:
        save_dataset(dataset, out_path)
    return dataset, report


def _pack_str(buf, s):
    raw = s.encode("utf-8")
    buf.write(struct.pack("<H", len(raw)))
    buf.write(raw)


def _unpack_str(buf):
    (n,) = struct.unpack("<H", buf.read(2))
    return buf.read(n).decode("utf-8")


def save_dataset(dataset, path):
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    _pack_str(buf, dataset.charset)
    buf.write(struct.pack("<Q", dataset.split_seed))
    buf.write(struct.pack("<B", _SET_CODES[dataset.landmark_set]))
    buf.write(struct.pack("<I", len(dataset.clips)))
    for clip in dataset.clips:
        _pack_str(buf, clip.clip_id)
        _pack_str(buf, clip.speaker_id)
        buf.write(struct.pack("<B", 1 if dataset.split[clip.clip_id] == "val" else 0))
        buf.write(struct.pack("<I", len(clip.token_ids)))
        buf.write(np.asarray(clip.token_ids, dtype="<u2").tobytes())
        buf.write(clip.reference.points.astype("<f4").tobytes())
        frames, width = clip.displacements.shape
        buf.write(struct.pack("<II", frames, width))
        buf.write(clip.displacements.astype("<f4").tobytes())
    data = buf.getvalue()
    with open(path, "wb") as fh:
        fh.write(data)
    return data


def load_dataset(path):
    with open(path, "rb") as fh:
        buf = io.BytesIO(fh.read())
    if buf.read(5) != MAGIC:
        raise FormatError(f"{path}: not an LTDS1 dataset file")
    (version,) = struct.unpack("<I", buf.read(4))
    if version != VERSION:
        raise FormatError(f"{path}: unsupported dataset version {version}")
    charset = _unpack_str(buf)
    (split_seed,) = struct.unpack("<Q", buf.read(8))
    (set_code,) = struct.unpack("<B", buf.read(1))
    landmark_set = _SET_NAMES.get(set_code)
    if landmark_set is None:
        raise FormatError(f"{path}: unknown landmark set code {set_code}")
    (n_clips,) = struct.unpack("<I", buf.read(4))
    clips, split = [], {}
    for _ in range(n_clips):
        cid = _unpack_str(buf)
        speaker = _unpack_str(buf)
        (val_flag,) = struct.unpack("<B", buf.read(1))
        (n_tokens,) = struct.unpack("<I", buf.read(4))
        tokens = np.frombuffer(buf.read(2 * n_tokens), dtype="<u2").tolist()
        ref = np.frombuffer(buf.read(4 * NUM_LANDMARKS * 3), dtype="<f4")
        ref = ref.astype(np.float64).reshape(NUM_LANDMARKS, 3)
        frames, width = struct.unpack("<II", buf.read(8))
        disp = np.frombuffer(buf.read(4 * frames * width), dtype="<f4")
        disp = disp.astype(np.float64).reshape(frames, width)
        reference = ReferenceFrame(speaker_id=speaker, points=ref)
        clips.append(
            NormalizedClip(
                clip_id=cid,
                speaker_id=speaker,
                token_ids=tokens,
                displacements=disp,
                reference=reference,
                landmark_set=landmark_set,
            )
        )
        split[cid] = "val" if val_flag else "train"
    return Dataset(
        clips=clips,
        charset=charset,
        split_seed=split_seed,
        landmark_set=landmark_set,
        split=split,
    )
