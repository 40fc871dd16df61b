"""Datasets, synthetic sessions, LOSO evaluation and metrics."""

from gesturegate.evaluation.crossval import EvalConfig, EvalReport, evaluate, loso_folds, train_pipeline
from gesturegate.evaluation.dataset import (
    Dataset,
    LabeledSession,
    load_dataset,
    read_session_csv,
    save_dataset,
    window_label,
    windows_of,
    write_session_csv,
)
from gesturegate.evaluation.metrics import confusion, macro_f1, per_class_f1
from gesturegate.evaluation.synth import SynthConfig, synth_dataset, synth_session

__all__ = [
    "Dataset",
    "EvalConfig",
    "EvalReport",
    "LabeledSession",
    "SynthConfig",
    "confusion",
    "evaluate",
    "load_dataset",
    "loso_folds",
    "macro_f1",
    "per_class_f1",
    "read_session_csv",
    "save_dataset",
    "synth_dataset",
    "synth_session",
    "train_pipeline",
    "window_label",
    "windows_of",
    "write_session_csv",
]
