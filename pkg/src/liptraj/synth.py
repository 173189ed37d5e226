"""Deterministic synthetic talking-face corpus.

Real corpora need video, a landmark tracker and hours of preprocessing; the
test and demo path instead fabricates clips that look exactly like tracker
output. Each clip pairs a short word sequence with a landmark trajectory
built from per-character articulation templates: every character has a
target lip aperture (how far the mouth opens) and rounding (how far the
corners pull in), vowels open, closures like M/B/P shut. The articulation
ramps linearly toward each character's target over a fixed number of
12.5 ms steps, so the native trajectory is already on the 80 fps grid.

A per-clip head pose (plus a slow sinusoidal wobble) is applied forward
before writing, so the reprojection path in the data pipeline is exercised
for real. Everything is a pure function of the seed: the same seed yields
byte-identical files.
"""

import os
from dataclasses import dataclass

import numpy as np

from .geometry import apply_pose
from .openface import NUM_LANDMARKS, POSE_COLUMNS, PoseParams

STEPS_PER_CHAR = 4  # 50 ms per character
LEAD_STEPS = 4      # silence before speech
TAIL_STEPS = 8      # mouth returns to rest
NATIVE_FPS = 80.0

# Articulation templates: character -> (aperture, rounding), both in [0, 1].
# Documented in the README; tests rely on A being far more open than M.
ARTICULATION = {
    "A": (1.00, 0.10), "B": (0.02, 0.00), "C": (0.30, 0.05), "D": (0.30, 0.00),
    "E": (0.70, 0.00), "F": (0.15, 0.00), "G": (0.35, 0.05), "H": (0.45, 0.00),
    "I": (0.50, 0.00), "J": (0.30, 0.20), "K": (0.35, 0.00), "L": (0.40, 0.00),
    "M": (0.02, 0.00), "N": (0.25, 0.00), "O": (0.85, 0.90), "P": (0.02, 0.00),
    "Q": (0.40, 0.80), "R": (0.35, 0.40), "S": (0.20, 0.00), "T": (0.28, 0.00),
    "U": (0.60, 0.95), "V": (0.15, 0.00), "W": (0.40, 0.85), "X": (0.25, 0.00),
    "Y": (0.50, 0.20), "Z": (0.22, 0.00),
    " ": (0.00, 0.00), "'": (0.15, 0.00), ".": (0.00, 0.00), ",": (0.00, 0.00),
}

WORDS = (
    "HELLO", "WORLD", "OPEN", "MOON", "VOICE", "TALK", "MODEL", "SPEAK",
    "ABOVE", "MAMBO", "EASY", "SOUND", "QUIET", "ROUND", "LIPS", "IT'S",
    "WORK", "TIME", "PAPA", "WAVE",
)


def base_face():
    """Canonical 68-point face in millimeters, mouth centered below origin.

    Axes follow the tracker convention: x right, y down, z away from the
    camera. The geometry only has to be plausible and fixed; it is the
    substrate the articulation patterns displace.
    """
    pts = np.zeros((NUM_LANDMARKS, 3), dtype=np.float64)
    # Jaw line 0-16: ear-to-ear arc through the chin.
    for i in range(17):
        t = i / 16.0
        pts[i] = (-62.0 * np.cos(np.pi * t), 14.0 + 46.0 * np.sin(np.pi * t), 2.0)
    # Eyebrows 17-26.
    for k, i in enumerate(range(17, 22)):
        pts[i] = (-44.0 + 8.0 * k, -34.0 - 3.0 * np.sin(np.pi * k / 4.0), -4.0)
    for k, i in enumerate(range(22, 27)):
        pts[i] = (12.0 + 8.0 * k, -34.0 - 3.0 * np.sin(np.pi * k / 4.0), -4.0)
    # Nose bridge 27-30 and base 31-35.
    for k, i in enumerate(range(27, 31)):
        pts[i] = (0.0, -24.0 + 10.0 * k, -6.0 - 2.5 * k)
    for k, i in enumerate(range(31, 36)):
        pts[i] = (-10.0 + 5.0 * k, 12.0, -8.0)
    # Eyes 36-47: two small hexagons.
    for k, i in enumerate(range(36, 42)):
        ang = np.pi - k * np.pi / 3.0
        pts[i] = (-31.0 + 9.0 * np.cos(ang), -24.0 - 3.5 * np.sin(ang), -3.0)
    for k, i in enumerate(range(42, 48)):
        ang = np.pi - k * np.pi / 3.0
        pts[i] = (31.0 + 9.0 * np.cos(ang), -24.0 - 3.5 * np.sin(ang), -3.0)
    # Outer lip ring 48-59 and inner ring 60-67 (y grows downward, so the
    # upper lip sits at cy - ry*sin).
    cy = 34.0
    for k in range(12):
        ang = np.pi - k * np.pi / 6.0
        pts[48 + k] = (24.0 * np.cos(ang), cy - 9.0 * np.sin(ang), -7.0)
    for k in range(8):
        ang = np.pi - k * np.pi / 4.0
        pts[60 + k] = (15.0 * np.cos(ang), cy - 2.0 * np.sin(ang), -6.0)
    return pts


def _articulation_patterns():
    """Displacement fields (mm per unit aperture / rounding)."""
    ap = np.zeros((NUM_LANDMARKS, 3), dtype=np.float64)
    # Lower lip and jaw drop (y is downward-positive).
    for i, amt in zip(range(55, 60), (4.5, 6.5, 7.5, 6.5, 4.5)):
        ap[i, 1] = amt
    for i, amt in zip(range(65, 68), (5.5, 6.5, 5.5)):
        ap[i, 1] = amt
    for i, amt in zip(range(6, 11), (1.5, 3.0, 4.0, 3.0, 1.5)):
        ap[i, 1] = amt
    # Upper lip lifts a little.
    for i, amt in zip(range(49, 54), (0.8, 1.4, 1.8, 1.4, 0.8)):
        ap[i, 1] = -amt
    for i, amt in zip(range(61, 64), (1.6, 2.0, 1.6)):
        ap[i, 1] = -amt
    for i in (48, 54, 60, 64):
        ap[i, 1] = 1.2  # corners sag slightly on open mouth

    rd = np.zeros((NUM_LANDMARKS, 3), dtype=np.float64)
    rd[48, 0], rd[54, 0] = 4.0, -4.0     # outer corners pull in
    rd[60, 0], rd[64, 0] = 2.5, -2.5
    rd[48:68, 2] = -2.0                  # lips protrude toward the camera
    return ap, rd


BASE_FACE = base_face()
APERTURE_PATTERN, ROUNDING_PATTERN = _articulation_patterns()


def articulation_track(text):
    """Per-frame (aperture, rounding) for ``text`` at the native 80 fps.

    Linear ramp to each character's target over its 4 steps, preceded by a
    short rest and followed by a close-down tail.
    """
    aperture = [0.0] * LEAD_STEPS
    rounding = [0.0] * LEAD_STEPS
    cur_a, cur_r = 0.0, 0.0
    for char in text:
        tgt_a, tgt_r = ARTICULATION[char]
        for s in range(1, STEPS_PER_CHAR + 1):
            w = s / STEPS_PER_CHAR
            aperture.append(cur_a + (tgt_a - cur_a) * w)
            rounding.append(cur_r + (tgt_r - cur_r) * w)
        cur_a, cur_r = tgt_a, tgt_r
    for s in range(1, TAIL_STEPS + 1):
        w = s / TAIL_STEPS
        aperture.append(cur_a * (1.0 - w))
        rounding.append(cur_r * (1.0 - w))
    return np.array(aperture), np.array(rounding)


def clip_trajectory(text, amplitude=1.0, face=None):
    """Canonical (pose-free) landmark trajectory for ``text``.

    Returns (timestamps, positions) with positions of shape (F, 68, 3).
    """
    face = BASE_FACE if face is None else face
    aperture, rounding = articulation_track(text)
    frames = len(aperture)
    positions = np.empty((frames, NUM_LANDMARKS, 3), dtype=np.float64)
    for t in range(frames):
        positions[t] = (
            face
            + amplitude * aperture[t] * APERTURE_PATTERN
            + amplitude * rounding[t] * ROUNDING_PATTERN
        )
    timestamps = np.arange(frames, dtype=np.float64) / NATIVE_FPS
    return timestamps, positions


def vertical_aperture(positions):
    """Mean inner-lip opening in millimeters per frame; a test observable."""
    top = positions[:, 61:64, 1].mean(axis=1)
    bottom = positions[:, 65:68, 1].mean(axis=1)
    return bottom - top


@dataclass
class SynthClip:
    clip_id: str
    speaker_id: str
    text: str


def _fmt(value):
    return repr(float(value))


def _write_csv(path, timestamps, world, poses):
    cols = list(("frame", "face_id", "timestamp", "confidence", "success"))
    cols += list(POSE_COLUMNS)
    for axis in "XYZ":
        cols += [f"{axis}_{i}" for i in range(NUM_LANDMARKS)]
    lines = [", ".join(cols)]
    for t in range(len(timestamps)):
        pose = poses[t]
        row = [str(t + 1), "0", _fmt(timestamps[t]), "1.0", "1"]
        row += [_fmt(v) for v in (pose.tx, pose.ty, pose.tz, pose.rx, pose.ry, pose.rz)]
        for ax in range(3):
            row += [_fmt(world[t, i, ax]) for i in range(NUM_LANDMARKS)]
        lines.append(", ".join(row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def synth_corpus(out_dir, seed, n_clips, n_speakers=2, fps=NATIVE_FPS, include_text=None):
    """Generate a corpus directory of OpenFace-format CSV/transcript pairs.

    Layout matches what :func:`liptraj.dataset.build_dataset` expects:
    ``<id>.csv`` + ``<id>.txt`` per clip and a ``speakers.tsv`` manifest.
    ``include_text`` optionally forces the first clip's sentence (handy for
    demos that later run inference on a known utterance).
    Returns the list of :class:`SynthClip` records.
    """
    if n_clips < 2:
        raise ValueError("n_clips must be at least 2")
    os.makedirs(out_dir, exist_ok=True)
    root = np.random.SeedSequence(int(seed))
    speaker_seeds = root.spawn(n_speakers)
    clip_seeds = root.spawn(n_speakers + n_clips)[n_speakers:]

    # Per-speaker anatomy: head size and articulation amplitude.
    speaker_scale, speaker_amp = [], []
    for ss in speaker_seeds:
        rng = np.random.default_rng(ss)
        speaker_scale.append(0.95 + 0.10 * rng.random())
        speaker_amp.append(0.85 + 0.30 * rng.random())

    clips = []
    manifest_lines = []
    for idx in range(n_clips):
        rng = np.random.default_rng(clip_seeds[idx])
        spk = idx % n_speakers
        clip_id = f"clip{idx:03d}"
        speaker_id = f"spk{spk}"
        if idx == 0 and include_text is not None:
            text = include_text
        else:
            n_words = int(rng.integers(2, 5))
            text = " ".join(rng.choice(WORDS) for _ in range(n_words))

        face = BASE_FACE * speaker_scale[spk]
        timestamps, canon = clip_trajectory(text, amplitude=speaker_amp[spk], face=face)
        if fps != NATIVE_FPS:
            # Sample the native trajectory at the requested source rate.
            src_t = np.arange(int(np.floor(timestamps[-1] * fps)) + 1) / fps
            flat = canon.reshape(canon.shape[0], -1)
            res = np.empty((len(src_t), flat.shape[1]))
            for j in range(flat.shape[1]):
                res[:, j] = np.interp(src_t, timestamps, flat[:, j])
            timestamps, canon = src_t, res.reshape(len(src_t), NUM_LANDMARKS, 3)

        # Per-clip pose with a slow wobble; applied forward so the pipeline
        # has to undo it.
        base_t = np.array([
            rng.uniform(-30.0, 30.0),
            rng.uniform(-20.0, 20.0),
            rng.uniform(350.0, 430.0),
        ])
        base_r = rng.uniform(-0.25, 0.25, size=3)
        wob_freq = rng.uniform(0.2, 0.6, size=6)
        wob_phase = rng.uniform(0.0, 2.0 * np.pi, size=6)

        frames = len(timestamps)
        world = np.empty_like(canon)
        poses = []
        for t in range(frames):
            wob = np.sin(2.0 * np.pi * wob_freq * timestamps[t] + wob_phase)
            tvec = base_t + 1.5 * wob[:3]
            rvec = base_r + 0.015 * wob[3:]
            pose = PoseParams(tvec[0], tvec[1], tvec[2], rvec[0], rvec[1], rvec[2])
            world[t] = apply_pose(canon[t], pose)
            poses.append(pose)

        _write_csv(os.path.join(out_dir, f"{clip_id}.csv"), timestamps, world, poses)
        with open(os.path.join(out_dir, f"{clip_id}.txt"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"Text:  {text}\nConf:  1\n")
        manifest_lines.append(f"{clip_id}\t{speaker_id}")
        clips.append(SynthClip(clip_id=clip_id, speaker_id=speaker_id, text=text))

    with open(os.path.join(out_dir, "speakers.tsv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(manifest_lines) + "\n")
    return clips
