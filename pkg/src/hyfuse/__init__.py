"""Hyperbolic fusion of two embedding families for classification experiments.

Numerics library (Poincare-ball maps, a small reverse-mode autodiff engine,
four downstream architectures) plus the training/evaluation machinery and a
CLI for running single-representation baselines, concatenation fusion, and
hyperbolic fusion over paired embedding files.
"""

from .autodiff import Tensor, backward, tensor
from .data import (
    EmbeddingSet,
    FoldPlan,
    PairedDataset,
    make_folds,
    pair_datasets,
    read_embedding_file,
    write_embedding_file,
)
from .geometry import BallPoint, PoincareConfig, exp_map_zero, log_map_zero, mobius_add, project_to_ball
from .metrics import classification_metrics, confusion_matrix
from .models import ModelParams, ModelSpec, build, load_checkpoint, parameter_count, save_checkpoint
from .optim import Adam
from .synth import SynthSpec, synth_generate
from .training import CrossValReport, FoldReport, TrainConfig, cross_validate, evaluate, train_fold

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "BallPoint",
    "CrossValReport",
    "EmbeddingSet",
    "FoldPlan",
    "FoldReport",
    "ModelParams",
    "ModelSpec",
    "PairedDataset",
    "PoincareConfig",
    "SynthSpec",
    "Tensor",
    "TrainConfig",
    "backward",
    "build",
    "classification_metrics",
    "confusion_matrix",
    "cross_validate",
    "evaluate",
    "exp_map_zero",
    "load_checkpoint",
    "log_map_zero",
    "make_folds",
    "mobius_add",
    "pair_datasets",
    "parameter_count",
    "project_to_ball",
    "read_embedding_file",
    "save_checkpoint",
    "synth_generate",
    "tensor",
    "train_fold",
    "write_embedding_file",
]
