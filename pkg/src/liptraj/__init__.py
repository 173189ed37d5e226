"""liptraj: text-driven 3D lip landmark trajectory synthesis.

Pipeline in one sentence: OpenFace-style landmark CSVs become pose-invariant
80 fps displacement labels, a character-level attention seq2seq model learns
to predict them from transcripts, and trained models synthesize lip motion
for arbitrary text.
"""

__version__ = "0.1.0"

from .dataset import BuildConfig, Dataset, build_dataset, load_dataset, save_dataset
from .metrics import compare_report, manhattan_error
from .model import Model, ModelConfig, full_config, toy_config
from .normalize import NormalizedClip, ReferenceFrame, denormalize, normalize_clip
from .synth import synth_corpus
from .text import CHARSET, encode_text
from .training import TrainConfig, ablate, pretrain_then_transfer, train

__all__ = [
    "BuildConfig",
    "CHARSET",
    "Dataset",
    "Model",
    "ModelConfig",
    "NormalizedClip",
    "ReferenceFrame",
    "TrainConfig",
    "__version__",
    "ablate",
    "build_dataset",
    "compare_report",
    "denormalize",
    "encode_text",
    "full_config",
    "load_dataset",
    "manhattan_error",
    "normalize_clip",
    "pretrain_then_transfer",
    "save_dataset",
    "synth_corpus",
    "toy_config",
    "train",
]
