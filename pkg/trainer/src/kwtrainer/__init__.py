"""Desk-scale trainer for the keyword/speech-activity net (LPMW export)."""

from .config import TrainConfig, TrainHistory
from .data import Example, build_batch, build_example, load_word_clips, log_mel
from .export import export_weights, parameter_manifest
from .model import KeywordNet
from .toywords import build_toy_corpus
from .train import DivergenceError, frame_word_accuracy, split_heldout, train

__all__ = [
    "TrainConfig",
    "TrainHistory",
    "Example",
    "build_batch",
    "build_example",
    "load_word_clips",
    "log_mel",
    "export_weights",
    "parameter_manifest",
    "KeywordNet",
    "build_toy_corpus",
    "DivergenceError",
    "frame_word_accuracy",
    "split_heldout",
    "train",
]
