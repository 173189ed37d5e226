"""Padded batch assembly with deterministic per-epoch shuffling.

A batch groups clips for one optimizer step. Tokens and target frames are
zero-padded to the batch maximum; the frame mask marks real frames and the
gate target is 0 until a sequence's last real frame, then 1 there and on
all padding, so a trained gate saturates once the utterance is over.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class Batch:
    clip_ids: list
    tokens: np.ndarray         # (B, T_max) int64, zero-padded
    text_lengths: np.ndarray   # (B,)
    targets: np.ndarray        # (B, F_max, width) float32, zero-padded
    frame_lengths: np.ndarray  # (B,)
    gate_targets: np.ndarray   # (B, F_max) float32
    frame_mask: np.ndarray     # (B, F_max) bool

    @property
    def size(self):
        return len(self.clip_ids)

    def sample_tokens(self, i):
        return self.tokens[i, : self.text_lengths[i]]

    def sample_targets(self, i):
        return self.targets[i, : self.frame_lengths[i]]

    def sample_gate_targets(self, i):
        return self.gate_targets[i, : self.frame_lengths[i]]


def _collate(clips):
    b = len(clips)
    t_max = max(len(c.token_ids) for c in clips)
    f_max = max(c.num_frames for c in clips)
    width = clips[0].width
    tokens = np.zeros((b, t_max), dtype=np.int64)
    text_lengths = np.zeros(b, dtype=np.int64)
    targets = np.zeros((b, f_max, width), dtype=np.float32)
    frame_lengths = np.zeros(b, dtype=np.int64)
    gate = np.zeros((b, f_max), dtype=np.float32)
    mask = np.zeros((b, f_max), dtype=bool)
    for i, clip in enumerate(clips):
        n_tok = len(clip.token_ids)
        n_frm = clip.num_frames
        tokens[i, :n_tok] = clip.token_ids
        text_lengths[i] = n_tok
        targets[i, :n_frm] = clip.displacements.astype(np.float32)
        frame_lengths[i] = n_frm
        gate[i, n_frm - 1 :] = 1.0
        mask[i, :n_frm] = True
    return Batch(
        clip_ids=[c.clip_id for c in clips],
        tokens=tokens,
        text_lengths=text_lengths,
        targets=targets,
        frame_lengths=frame_lengths,
        gate_targets=gate,
        frame_mask=mask,
    )


def make_batches(clips, batch_size, seed, epoch):
    """Shuffle ``clips`` with a per-(seed, epoch) permutation and collate.

    The final batch keeps the remainder, so ``ceil(len/batch_size)`` batches
    come out.
    """
    if not clips:
        return []
    rng = np.random.default_rng([int(seed), int(epoch), 0xBA7C])
    order = rng.permutation(len(clips))
    shuffled = [clips[i] for i in order]
    return [
        _collate(shuffled[i : i + batch_size])
        for i in range(0, len(shuffled), batch_size)
    ]
