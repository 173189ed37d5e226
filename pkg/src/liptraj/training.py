"""Training loop, validation/checkpointing, transfer learning and ablations.

Batches are gradient-accumulation groups: each clip runs through the
teacher-forced forward on its own (no padded steps are ever decoded) and the
loss terms combine as sums over real elements divided by the global element
count, so padding provably contributes nothing.

The composite loss is ``smooth_l1(decoder frames)``, plus the Post-Net MSE
term when that block is enabled, plus a weighted stop-gate BCE term when the
gate is actually trainable (a frozen, pre-trained gate gets no loss, which
mirrors regressing only on the decoder).
"""

import json
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import losses
from .autodiff import Tape, backward
from .batching import make_batches, _collate
from .checkpoint import load_partial, write_checkpoint
from .errors import ContractError, FormatError, TrainingDiverged
from .model import Model, RunMode, EVAL
from .optim import AdamState, adam_step, one_cycle_lr

TRANSFER_PREFIXES = ("encoder.", "gate.")


@dataclass
class TrainConfig:
    peak_lr: float = 0.002
    smooth_l1_beta: float = 1.0
    batch_size: int = 8
    epochs: int = 500
    sched_step_size: int = 4000
    lr_floor_div: float = 25.0
    val_interval: int = 5
    seed: int = 0
    freeze: tuple = ()
    gate_loss_weight: float = 1.0

    def __post_init__(self):
        for name in ("peak_lr", "smooth_l1_beta", "batch_size", "epochs",
                     "sched_step_size", "val_interval", "gate_loss_weight"):
            if getattr(self, name) <= 0:
                raise ContractError(f"TrainConfig.{name} must be positive")
        self.freeze = tuple(self.freeze)

    def to_dict(self):
        d = asdict(self)
        d["freeze"] = list(self.freeze)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["freeze"] = tuple(d.get("freeze", ()))
        return cls(**d)


@dataclass
class HistoryRow:
    iteration: int
    epoch: int
    train_loss: float
    val_loss: float
    lr: float


@dataclass
class TrainHistory:
    rows: list = field(default_factory=list)
    epoch_train_losses: list = field(default_factory=list)  # one per epoch
    best_epoch: int = -1
    best_val_loss: float = float("inf")
    best_checkpoint: str = ""

    CSV_HEADER = "iteration,epoch,train_loss,val_loss,lr"

    def to_csv(self):
        lines = [self.CSV_HEADER]
        for r in self.rows:
            lines.append(
                f"{r.iteration},{r.epoch},{r.train_loss!r},{r.val_loss!r},{r.lr!r}"
            )
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text):
        lines = [ln for ln in text.splitlines() if ln]
        if not lines or lines[0] != cls.CSV_HEADER:
            raise FormatError("history CSV missing expected header")
        hist = cls()
        for ln in lines[1:]:
            it, ep, tl, vl, lr = ln.split(",")
            hist.rows.append(
                HistoryRow(int(it), int(ep), float(tl), float(vl), float(lr))
            )
        if hist.rows:
            best = min(hist.rows, key=lambda r: r.val_loss)
            hist.best_epoch = best.epoch
            hist.best_val_loss = best.val_loss
        return hist

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_csv(fh.read())


def total_loss(outputs, batch, config, *, use_postnet, gate_trainable):
    """Composite loss over one batch of per-sample forward outputs.

    Returns (scalar DiffArray, per-term breakdown dict of floats).
    """
    if len(outputs) != batch.size:
        raise ContractError(f"{len(outputs)} outputs for a batch of {batch.size}")
    beta = config.smooth_l1_beta

    def combine(term_sums, counts):
        total = term_sums[0]
        for t in term_sums[1:]:
            total = total + t
        return total * (1.0 / float(sum(counts)))

    dec_sums, counts = [], []
    for i, out in enumerate(outputs):
        target = batch.sample_targets(i)
        dec_sums.append(losses.smooth_l1(out.frames, target, beta, reduction="sum"))
        counts.append(target.size)
    loss = combine(dec_sums, counts)
    breakdown = {"decoder": float(loss.data)}

    if use_postnet:
        post_sums = [
            losses.mse(out.postnet_frames, batch.sample_targets(i), reduction="sum")
            for i, out in enumerate(outputs)
        ]
        post = combine(post_sums, counts)
        breakdown["postnet"] = float(post.data)
        loss = loss + post

    if gate_trainable:
        gate_sums, gate_counts = [], []
        for i, out in enumerate(outputs):
            gt = batch.sample_gate_targets(i)
            gate_sums.append(losses.bce_logits(out.gate_logits, gt, reduction="sum"))
            gate_counts.append(gt.size)
        gate = combine(gate_sums, gate_counts) * float(config.gate_loss_weight)
        breakdown["gate"] = float(gate.data)
        loss = loss + gate

    breakdown["total"] = float(loss.data)
    return loss, breakdown


def evaluate(model, clips, config, *, gate_trainable):
    """Validation loss: same composite as training, dropout off, running BN."""
    if not clips:
        raise ContractError("evaluate needs at least one clip")
    batch = _collate(clips)
    outputs = [
        model.forward_teacher_forced(batch.sample_tokens(i), batch.sample_targets(i), EVAL)
        for i in range(batch.size)
    ]
    loss, breakdown = total_loss(
        outputs, batch, config,
        use_postnet=model.config.use_postnet,
        gate_trainable=gate_trainable,
    )
    return float(loss.data), breakdown


def train(dataset, model, config, out_dir,
          history_name="history.csv", checkpoint_name="best.ckpt"):
    """Epoch loop with teacher forcing, one-cycle LR and best-checkpointing.

    Validation runs every ``val_interval`` epochs and always at the final
    epoch; the best model by validation loss is written to
    ``out_dir/checkpoint_name``. Returns a :class:`TrainHistory`.
    """
    os.makedirs(out_dir, exist_ok=True)
    train_clips = dataset.train_clips()
    val_clips = dataset.val_clips()
    if not train_clips or not val_clips:
        raise ContractError("dataset needs both train and validation clips")

    store = model.store
    if config.freeze:
        store.freeze_prefixes(config.freeze)
    gate_trainable = not store.is_frozen("gate.w")

    adam = AdamState()
    dropout_rng = np.random.default_rng([int(config.seed), 0xD120])
    history = TrainHistory()
    ckpt_path = os.path.join(out_dir, checkpoint_name)

    iteration = 0
    lr = one_cycle_lr(0, config.peak_lr, config.sched_step_size, config.lr_floor_div)
    interval_losses = []
    for epoch in range(1, config.epochs + 1):
        epoch_losses = []
        for batch in make_batches(train_clips, config.batch_size, config.seed, epoch):
            store.zero_grad()
            mode = RunMode.train(dropout_rng)
            with Tape() as tape:
                outputs = [
                    model.forward_teacher_forced(
                        batch.sample_tokens(i), batch.sample_targets(i), mode
                    )
                    for i in range(batch.size)
                ]
                loss, _ = total_loss(
                    outputs, batch, config,
                    use_postnet=model.config.use_postnet,
                    gate_trainable=gate_trainable,
                )
            loss_value = float(loss.data)
            if not np.isfinite(loss_value):
                norm, (worst_name, worst_peak) = store.grad_norms()
                raise TrainingDiverged(
                    f"non-finite loss {loss_value} at iteration {iteration} "
                    f"(epoch {epoch}), lr={lr:.3e}, last grad norm={norm:.3e}, "
                    f"peak |grad| {worst_peak:.3e} at {worst_name or 'n/a'}"
                )
            backward(tape, loss)
            lr = one_cycle_lr(iteration, config.peak_lr, config.sched_step_size,
                              config.lr_floor_div)
            adam_step(store, adam, lr)
            iteration += 1
            epoch_losses.append(loss_value)
            interval_losses.append(loss_value)
        history.epoch_train_losses.append(float(np.mean(epoch_losses)))

        if epoch % config.val_interval == 0 or epoch == config.epochs:
            val_loss, _ = evaluate(model, val_clips, config, gate_trainable=gate_trainable)
            train_loss = float(np.mean(interval_losses)) if interval_losses else float("nan")
            interval_losses = []
            history.rows.append(
                HistoryRow(iteration=iteration, epoch=epoch,
                           train_loss=train_loss, val_loss=val_loss, lr=lr)
            )
            if val_loss < history.best_val_loss:
                history.best_val_loss = val_loss
                history.best_epoch = epoch
                history.best_checkpoint = ckpt_path
                write_checkpoint(
                    model, ckpt_path,
                    metadata={
                        "epoch": epoch,
                        "val_loss": val_loss,
                        "freeze": list(config.freeze),
                        "train_config": config.to_dict(),
                    },
                )

    history.save(os.path.join(out_dir, history_name))
    return history


@dataclass
class TransferResult:
    phase1: TrainHistory
    phase2: TrainHistory
    report: dict
    phase1_dir: str
    phase2_dir: str
    model: Model


def pretrain_then_transfer(dataset_a, dataset_b, model_config, phase1_config,
                           phase2_config, out_dir):
    """Reproduce the pre-train/freeze transfer mechanism on two corpora.

    Phase 1 trains everything (gate included) on corpus A. Phase 2 builds a
    fresh model, loads only ``encoder.*`` and ``gate.*`` from the phase-1
    best checkpoint, freezes them and retrains the rest on corpus B.
    """
    phase1_dir = os.path.join(out_dir, "phase1")
    phase2_dir = os.path.join(out_dir, "phase2")

    model1 = Model(model_config, seed=phase1_config.seed)
    cfg1 = replace(phase1_config, freeze=())
    hist1 = train(dataset_a, model1, cfg1, phase1_dir)

    with open(hist1.best_checkpoint, "rb") as fh:
        pretrained = fh.read()
    model2 = Model(model_config, seed=phase2_config.seed + 1)
    report = load_partial(model2, pretrained, TRANSFER_PREFIXES)
    cfg2 = replace(
        phase2_config,
        freeze=tuple(sorted(set(phase2_config.freeze) | set(TRANSFER_PREFIXES))),
    )
    hist2 = train(dataset_b, model2, cfg2, phase2_dir)
    return TransferResult(
        phase1=hist1, phase2=hist2, report=report,
        phase1_dir=phase1_dir, phase2_dir=phase2_dir, model=model2,
    )


ABLATION_ROWS = (
    # (use_postnet, use_prenet, pretrained) in the published table's order
    (True, True, True),
    (False, True, True),
    (False, False, True),
    (False, False, False),
)

ABLATION_EPOCH_CAP = 50


@dataclass
class AblationRow:
    postnet: bool
    prenet: bool
    pretrained: bool
    best_val_loss: float
    best_epoch: int
    final_val_loss: float
    final_epoch: int


def ablation_csv(rows):
    lines = ["val_loss,epoch,postnet,prenet,pretrained"]
    for r in rows:
        lines.append(
            f"{r.best_val_loss!r},{r.best_epoch},"
            f"{int(r.postnet)},{int(r.prenet)},{int(r.pretrained)}"
        )
    return "\n".join(lines) + "\n"


def ablate(dataset, model_config, train_config, pretrained_bytes, out_dir):
    """Run the four-configuration ablation matrix, 50-epoch cap per row.

    Rows with ``pretrained`` load and freeze encoder/gate weights from
    ``pretrained_bytes``; the bare row trains everything from scratch.
    Writes ``ablation.csv`` (best loss + epoch per row) and
    ``ablation_detail.json`` (adds final-epoch losses).
    """
    os.makedirs(out_dir, exist_ok=True)
    epochs = min(train_config.epochs, ABLATION_EPOCH_CAP)
    results = []
    for postnet, prenet, pretrained in ABLATION_ROWS:
        tag = f"post{int(postnet)}_pre{int(prenet)}_tl{int(pretrained)}"
        row_cfg = replace(model_config, use_postnet=postnet, use_prenet=prenet)
        freeze = TRANSFER_PREFIXES if pretrained else ()
        cfg = replace(train_config, epochs=epochs, freeze=freeze)
        model = Model(row_cfg, seed=cfg.seed)
        if pretrained:
            if pretrained_bytes is None:
                raise ContractError("ablation rows with pretrained weights need a checkpoint")
            load_partial(model, pretrained_bytes, TRANSFER_PREFIXES)
        hist = train(dataset, model, cfg, os.path.join(out_dir, tag))
        results.append(
            AblationRow(
                postnet=postnet, prenet=prenet, pretrained=pretrained,
                best_val_loss=hist.best_val_loss, best_epoch=hist.best_epoch,
                final_val_loss=hist.rows[-1].val_loss, final_epoch=hist.rows[-1].epoch,
            )
        )
    with open(os.path.join(out_dir, "ablation.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(ablation_csv(results))
    detail = [asdict(r) for r in results]
    with open(os.path.join(out_dir, "ablation_detail.json"), "w", encoding="utf-8") as fh:
        json.dump(detail, fh, indent=2, sort_keys=True)
    return results
