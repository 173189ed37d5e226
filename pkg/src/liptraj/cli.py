"""Command-line surface.

Every run resolves its configuration (JSON file section + dotted ``--set``
overrides + preset defaults), executes one pipeline stage and writes a
manifest (resolved config, seed, versions, artifact paths) next to its
outputs so any result can be reproduced from its manifest alone. Artifact
paths are echoed on stdout; failures map to distinct nonzero exit codes.
"""

import argparse
import json
import os
import sys
from dataclasses import fields, replace

import numpy as np

from . import __version__
from . import kernels
from .checkpoint import load_partial, read_checkpoint
from .dataset import BuildConfig, build_dataset, load_dataset
from .errors import LiptrajError, UsageError
from .export import export_trajectory, read_trajectory_csv
from .metrics import compare_report
from .model import Model, PRESETS
from .synth import synth_corpus
from .text import encode_text
from .training import (
    TRANSFER_PREFIXES,
    TrainConfig,
    ablate,
    pretrain_then_transfer,
    train,
)

SECTIONS = ("model", "trainer", "corpus")


def _parse_value(raw):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _load_config_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    for key in data:
        if key not in SECTIONS:
            raise UsageError(f"unknown config section {key!r}; expected {SECTIONS}")
    return {s: dict(data.get(s, {})) for s in SECTIONS}


def resolve_configs(config_path, overrides, preset="toy", seed=None):
    """Merge file config and ``--set section.key=value`` overrides.

    Returns (model_config_kwargs, train_config, build_config, resolved_dict).
    Model kwargs stay unApplied because charset size and output width come
    from the dataset at model-build time.
    """
    raw = {s: {} for s in SECTIONS}
    if config_path:
        raw = _load_config_file(config_path)
    for item in overrides or []:
        if "=" not in item:
            raise UsageError(f"--set expects section.key=value, got {item!r}")
        dotted, value = item.split("=", 1)
        parts = dotted.split(".")
        if len(parts) != 2 or parts[0] not in SECTIONS:
            raise UsageError(f"--set key must be one of {SECTIONS} + '.field', got {dotted!r}")
        raw[parts[0]][parts[1]] = _parse_value(value)

    preset = raw["model"].pop("preset", preset)
    if preset not in PRESETS:
        raise UsageError(f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}")
    model_fields = {f.name for f in fields(PRESETS[preset]().__class__)}
    for key in raw["model"]:
        if key not in model_fields:
            raise UsageError(f"unknown model config field {key!r}")
    trainer_fields = {f.name for f in fields(TrainConfig)}
    for key in raw["trainer"]:
        if key not in trainer_fields:
            raise UsageError(f"unknown trainer config field {key!r}")
    corpus_fields = {f.name for f in fields(BuildConfig)}
    for key in raw["corpus"]:
        if key not in corpus_fields:
            raise UsageError(f"unknown corpus config field {key!r}")

    if seed is not None:
        raw["trainer"].setdefault("seed", seed)
        raw["corpus"].setdefault("split_seed", seed)
    try:
        train_cfg = TrainConfig.from_dict(raw["trainer"])
        build_cfg = BuildConfig(**raw["corpus"])
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad configuration: {exc}") from None
    resolved = {
        "preset": preset,
        "model": dict(raw["model"]),
        "trainer": train_cfg.to_dict(),
        "corpus": build_cfg.__dict__.copy(),
    }
    return (preset, dict(raw["model"])), train_cfg, build_cfg, resolved


def build_model_for_dataset(preset_and_overrides, dataset, seed):
    preset, overrides = preset_and_overrides
    overrides = dict(overrides)
    overrides["charset_size"] = len(dataset.charset)
    overrides["output_width"] = dataset.width
    try:
        config = PRESETS[preset](**overrides)
    except TypeError as exc:
        raise UsageError(f"bad model configuration: {exc}") from None
    return Model(config, seed=seed)


def write_manifest(out_dir, command, resolved, artifacts, extra=None):
    manifest = {
        "command": command,
        "config": resolved,
        "artifacts": sorted(artifacts),
        "versions": {
            "liptraj": __version__,
            "numpy": np.__version__,
            "kernel_backend": kernels.BACKEND,
        },
    }
    if extra:
        manifest.update(extra)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return path


def _echo(paths):
    for p in paths:
        print(p)


# ---------------------------------------------------------------------------
# Subcommand handlers


def cmd_synth(args):
    clips = synth_corpus(
        args.out, seed=args.seed, n_clips=args.clips,
        n_speakers=args.speakers, fps=args.fps, include_text=args.include_text,
    )
    artifacts = [os.path.join(args.out, "speakers.tsv")]
    artifacts += [os.path.join(args.out, f"{c.clip_id}.csv") for c in clips]
    manifest = write_manifest(
        args.out, "synth",
        {"seed": args.seed, "clips": args.clips, "speakers": args.speakers, "fps": args.fps},
        artifacts,
    )
    _echo(artifacts + [manifest])
    return 0


def cmd_prepare(args):
    _, _, build_cfg, resolved = resolve_configs(args.config, args.set, seed=args.seed)
    dataset, report = build_dataset(args.data, build_cfg, out_path=args.out)
    rejects_path = args.out + ".rejects.txt"
    with open(rejects_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_text())
    manifest = write_manifest(
        os.path.dirname(os.path.abspath(args.out)) or ".",
        "prepare", resolved, [args.out, rejects_path],
        extra={"clips": len(dataset.clips), "rejected": len(report)},
    )
    _echo([args.out, rejects_path, manifest])
    return 0


def cmd_train(args):
    preset_over, train_cfg, _, resolved = resolve_configs(
        args.config, args.set, preset=args.preset, seed=args.seed
    )
    dataset = load_dataset(args.dataset)
    model = build_model_for_dataset(preset_over, dataset, seed=train_cfg.seed)
    if args.pretrained:
        with open(args.pretrained, "rb") as fh:
            pretrained = fh.read()
        load_partial(model, pretrained, TRANSFER_PREFIXES)
        if not train_cfg.freeze:
            train_cfg = replace(train_cfg, freeze=TRANSFER_PREFIXES)
        resolved["trainer"] = train_cfg.to_dict()
    history = train(dataset, model, train_cfg, args.out)
    artifacts = [
        os.path.join(args.out, "history.csv"),
        history.best_checkpoint,
    ]
    manifest = write_manifest(
        args.out, "train", resolved, artifacts,
        extra={
            "dataset": os.path.abspath(args.dataset),
            "best_epoch": history.best_epoch,
            "best_val_loss": history.best_val_loss,
        },
    )
    _echo(artifacts + [manifest])
    return 0


def cmd_pretrain(args):
    preset_over, train_cfg, _, resolved = resolve_configs(
        args.config, args.set, preset=args.preset, seed=args.seed
    )
    dataset_a = load_dataset(args.dataset_a)
    dataset_b = load_dataset(args.dataset_b)
    model_probe = build_model_for_dataset(preset_over, dataset_a, seed=train_cfg.seed)
    result = pretrain_then_transfer(
        dataset_a, dataset_b, model_probe.config, train_cfg, train_cfg, args.out
    )
    artifacts = [
        os.path.join(result.phase1_dir, "history.csv"),
        result.phase1.best_checkpoint,
        os.path.join(result.phase2_dir, "history.csv"),
        result.phase2.best_checkpoint,
    ]
    manifest = write_manifest(
        args.out, "pretrain", resolved, artifacts,
        extra={"transfer_report": result.report},
    )
    _echo(artifacts + [manifest])
    return 0


def cmd_ablate(args):
    preset_over, train_cfg, _, resolved = resolve_configs(
        args.config, args.set, preset=args.preset, seed=args.seed
    )
    dataset = load_dataset(args.dataset)
    pretrained = None
    if args.pretrained:
        with open(args.pretrained, "rb") as fh:
            pretrained = fh.read()
    model_probe = build_model_for_dataset(preset_over, dataset, seed=train_cfg.seed)
    ablate(dataset, model_probe.config, train_cfg, pretrained, args.out)
    artifacts = [
        os.path.join(args.out, "ablation.csv"),
        os.path.join(args.out, "ablation_detail.json"),
    ]
    manifest = write_manifest(args.out, "ablate", resolved, artifacts)
    _echo(artifacts + [manifest])
    return 0


def cmd_infer(args):
    model, metadata = read_checkpoint(args.checkpoint)
    dataset = load_dataset(args.dataset)
    speaker = args.speaker
    references = {c.speaker_id: c.reference for c in dataset.clips}
    if speaker is None:
        speaker = sorted(references)[0]
    if speaker not in references:
        raise UsageError(f"speaker {speaker!r} not in dataset; have {sorted(references)}")
    tokens = encode_text(" ".join(args.text.upper().split()), dataset.charset)
    result = model.infer(
        tokens, gate_threshold=args.gate_threshold, max_frames=args.max_frames
    )
    files = export_trajectory(result.frames, references[speaker], "csv", args.out)
    out_dir = os.path.dirname(os.path.abspath(args.out)) or "."
    manifest = write_manifest(
        out_dir, "infer",
        {"checkpoint": os.path.abspath(args.checkpoint), "text": args.text,
         "speaker": speaker, "gate_threshold": args.gate_threshold,
         "max_frames": args.max_frames, "checkpoint_metadata": metadata},
        files,
        extra={
            "frames": result.num_frames,
            "duration_seconds": result.duration_seconds,
            "stopped_by_gate": result.stopped_by_gate,
        },
    )
    _echo(files + [manifest])
    return 0


def cmd_eval(args):
    truth, _ = read_trajectory_csv(open(args.truth, "r", encoding="utf-8").read())
    preds = []
    for path in args.pred:
        traj, _ = read_trajectory_csv(open(path, "r", encoding="utf-8").read())
        preds.append(traj)
    labels = args.labels or [os.path.basename(p) for p in args.pred]
    report = compare_report(preds, truth, labels)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
    sys.stdout.write(report.to_table())
    _echo([args.out])
    return 0


def cmd_export(args):
    dataset = load_dataset(args.dataset)
    by_id = {c.clip_id: c for c in dataset.clips}
    if args.clip not in by_id:
        raise UsageError(f"clip {args.clip!r} not in dataset; have {sorted(by_id)[:8]}...")
    clip = by_id[args.clip]
    files = export_trajectory(clip.displacements, clip.reference, args.format, args.out)
    _echo(files)
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="liptraj",
        description="Text-driven 3D lip landmark trajectory synthesis",
    )
    parser.add_argument("--version", action="version", version=f"liptraj {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="JSON config file with model/trainer/corpus sections")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override a config field (repeatable)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=out_required,
                       default=os.environ.get("LIPTRAJ_OUT"),
                       help="output directory or file")

    p = sub.add_parser("synth", help="generate a synthetic corpus directory")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clips", type=int, default=12)
    p.add_argument("--speakers", type=int, default=2)
    p.add_argument("--fps", type=float, default=80.0)
    p.add_argument("--include-text", default=None,
                   help="force the first clip's sentence")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prepare", help="build a dataset file from a corpus directory")
    p.add_argument("--data", required=True, help="corpus directory")
    common(p)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train on a dataset file")
    p.add_argument("--dataset", required=True)
    p.add_argument("--preset", default="toy", choices=sorted(PRESETS))
    p.add_argument("--pretrained", help="checkpoint whose encoder/gate weights to load and freeze")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("pretrain", help="pretrain on corpus A, transfer encoder/gate to corpus B")
    p.add_argument("--dataset-a", required=True)
    p.add_argument("--dataset-b", required=True)
    p.add_argument("--preset", default="toy", choices=sorted(PRESETS))
    common(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("ablate", help="run the 4-row Pre/Post-Net + pretrained ablation")
    p.add_argument("--dataset", required=True)
    p.add_argument("--pretrained", help="checkpoint for the pretrained rows")
    p.add_argument("--preset", default="toy", choices=sorted(PRESETS))
    common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("infer", help="synthesize a trajectory for text")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--dataset", required=True,
                   help="dataset file supplying charset and reference frames")
    p.add_argument("--speaker", default=None)
    p.add_argument("--gate-threshold", type=float, default=0.5)
    p.add_argument("--max-frames", type=int, default=1000)
    p.add_argument("--out", required=True, help="trajectory CSV path")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="compare trajectory CSVs against a ground truth")
    p.add_argument("--pred", action="append", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--labels", nargs="*", default=None)
    p.add_argument("--out", required=True, help="JSON report path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export", help="export a dataset clip's trajectory")
    p.add_argument("--dataset", required=True)
    p.add_argument("--clip", required=True)
    p.add_argument("--format", default="csv", choices=("csv", "svg-frames"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LiptrajError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
