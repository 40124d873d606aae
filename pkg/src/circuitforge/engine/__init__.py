"""Numpy-backed execution engine for architecture specs."""

from .graph import CompiledGraph, compile_arch, load_checkpoint, save_checkpoint
from .kernels import softmax_xent
from .optim import SGD, Adam
from .train import EpochSummary, EvalReport, TrainConfig, evaluate, fit, train_epoch

__all__ = [
    "Adam",
    "CompiledGraph",
    "EpochSummary",
    "EvalReport",
    "SGD",
    "TrainConfig",
    "compile_arch",
    "evaluate",
    "fit",
    "load_checkpoint",
    "save_checkpoint",
    "softmax_xent",
    "train_epoch",
]
