"""Leave-one-session-out evaluation of the full gated pipeline."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from gesturegate import NULL
from gesturegate.errors import DataError
from gesturegate.evaluation.dataset import Dataset, LabeledSession, SessionWindows, windows_of
from gesturegate.evaluation.metrics import confusion, macro_f1
from gesturegate.fusion import Classifier, GateModels, GateState, PowerModel, Stage, gate_step, gating_savings
from gesturegate.nn.builders import build_capacitive_model, build_inertial_model
from gesturegate.nn.model import ModelWeights
from gesturegate.nn.spec import ModelSpec
from gesturegate.nn.train import CAPACITIVE_TRAIN, INERTIAL_TRAIN, TrainConfig, fit
from gesturegate.smoothing import DEFAULT_K, DEFAULT_MAX_GAP, smooth
from gesturegate.stream import (
    MOVEMENT_SPAN,
    WINDOW_LEN,
    WINDOW_STEP,
    ChannelSet,
    MovementDetectorConfig,
    Window,
    calibrate_threshold,
    movement_scores,
)

log = logging.getLogger(__name__)


def loso_folds(d: Dataset) -> list[tuple[list[LabeledSession], LabeledSession]]:
    if len(d.sessions) < 2:
        raise DataError(
            f"leave-one-session-out needs at least 2 sessions, got {len(d.sessions)}; "
            "generate more sessions (e.g. --sessions 10)"
        )
    return [(d.sessions[:i] + d.sessions[i + 1 :], s) for i, s in enumerate(d.sessions)]


@dataclass(frozen=True)
class EvalConfig:
    window_len: int = WINDOW_LEN
    step: int = WINDOW_STEP
    train_step: int = 100  # stride of training windows; inference always uses ``step``
    span: int = MOVEMENT_SPAN
    threshold: float | None = None  # None: calibrate from the training sessions' lead-ins
    inertial_train: TrainConfig = INERTIAL_TRAIN
    capacitive_train: TrainConfig = CAPACITIVE_TRAIN
    power: PowerModel = field(default_factory=PowerModel)
    max_gap: int = DEFAULT_MAX_GAP
    k: int = DEFAULT_K
    seed: int = 0
    n_jobs: int = 1


@dataclass
class TrainedPipeline:
    inertial: tuple[ModelSpec, ModelWeights]
    capacitive: tuple[ModelSpec, ModelWeights]
    detector: MovementDetectorConfig
    inertial_history: list[dict]
    capacitive_history: list[dict]

    def gate_models(self) -> GateModels:
        return GateModels(Classifier(*self.inertial), Classifier(*self.capacitive))


def calibrate_from_sessions(sessions, span: int = MOVEMENT_SPAN) -> float:
    """mean + 3 std of the movement score over every session's stationary lead-in."""
    scores = np.concatenate([movement_scores(s.leading_null(), span) for s in sessions])
    if scores.size == 0:
        raise DataError("no stationary lead-in long enough to calibrate the movement threshold")
    return float(scores.mean() + 3 * scores.std())


def _stack(wins: list[SessionWindows]):
    xi, xc, y = [], [], []
    for w in wins:
        a, b = w.normalized()
        xi.append(a)
        xc.append(b)
        y.append(w.labels)
    return np.concatenate(xi), np.concatenate(xc), np.concatenate(y)


def train_pipeline(sessions: list[LabeledSession], cfg: EvalConfig = EvalConfig(), seed: int | None = None) -> TrainedPipeline:
    """Train both models; the last session is held out for early stopping."""
    if len(sessions) < 2:
        raise DataError("training needs at least 2 sessions (one is held out for validation)")
    seed = cfg.seed if seed is None else seed
    fit_sessions, val_session = sessions[:-1], sessions[-1]
    train_w = [windows_of(s, cfg.window_len, cfg.train_step) for s in fit_sessions]
    val_w = [windows_of(val_session, cfg.window_len, cfg.step)]
    xi, xc, y = _stack(train_w)
    vi, vc, vy = _stack(val_w)

    inertial_spec = build_inertial_model(cfg.window_len)
    capacitive_spec = build_capacitive_model(cfg.window_len)
    wi, hist_i = fit(
        inertial_spec, xi, (y != NULL).astype(np.int64), cfg.inertial_train, (vi, (vy != NULL).astype(np.int64)), seed
    )
    wc, hist_c = fit(capacitive_spec, xc, y, cfg.capacitive_train, (vc, vy), seed + 1)

    threshold = cfg.threshold if cfg.threshold is not None else calibrate_from_sessions(sessions, cfg.span)
    detector = MovementDetectorConfig(threshold=threshold, span=cfg.span)
    return TrainedPipeline((inertial_spec, wi), (capacitive_spec, wc), detector, hist_i, hist_c)


def run_gate_on_windows(
    wins: SessionWindows, models: GateModels, detector: MovementDetectorConfig, power: PowerModel = PowerModel()
):
    state = GateState()
    events = []
    for i, start in enumerate(wins.starts):
        iw = Window(wins.inertial[i], ChannelSet.INERTIAL3, start_index=int(start))
        cw = Window(wins.capacitive[i], ChannelSet.CAPACITIVE4, start_index=int(start))
        state, ev = gate_step(state, iw, cw, models, detector, power)
        events.append(ev)
    return events


@dataclass
class FoldResult:
    test_session: str
    confusion_raw: np.ndarray | None = None
    confusion_smoothed: np.ndarray | None = None
    f1_raw: float = float("nan")
    f1_smoothed: float = float("nan")
    gate_f1: float = float("nan")  # null-vs-gesture at the gate output
    stage_counts: dict = field(default_factory=dict)
    gating_savings: float = float("nan")
    threshold: float = float("nan")
    epochs: tuple[int, int] = (0, 0)
    seconds: float = 0.0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _run_fold(args) -> FoldResult:
    index, train_sessions, test_session, cfg = args
    t0 = time.perf_counter()
    result = FoldResult(test_session.id)
    try:
        pipe = train_pipeline(train_sessions, cfg, seed=cfg.seed + 1000 * index)
        wins = windows_of(test_session, cfg.window_len, cfg.step)
        events = run_gate_on_windows(wins, pipe.gate_models(), pipe.detector, cfg.power)
        pred = np.array([e.label for e in events], dtype=np.int64)
        pred_s = np.array(smooth(pred, cfg.max_gap, cfg.k), dtype=np.int64)
        result.confusion_raw = confusion(wins.labels, pred)
        result.confusion_smoothed = confusion(wins.labels, pred_s)
        result.f1_raw = macro_f1(result.confusion_raw)
        result.f1_smoothed = macro_f1(result.confusion_smoothed)
        result.gate_f1 = macro_f1(confusion((wins.labels != NULL).astype(int), (pred != NULL).astype(int), 2))
        result.stage_counts = {s.label: sum(e.stage_reached == s for e in events) for s in Stage}
        result.gating_savings = gating_savings(events, cfg.power)
        result.threshold = pipe.detector.threshold
        result.epochs = (len(pipe.inertial_history), len(pipe.capacitive_history))
    except Exception as exc:  # one bad fold must not sink the others
        log.exception("fold %d (%s) failed", index, test_session.id)
        result.error = f"{type(exc).__name__}: {exc}"
    result.seconds = time.perf_counter() - t0
    return result


@dataclass
class EvalReport:
    folds: list[FoldResult]
    config: EvalConfig

    @property
    def ok_folds(self) -> list[FoldResult]:
        return [f for f in self.folds if f.ok]

    def _mean(self, attr: str) -> float:
        vals = [getattr(f, attr) for f in self.ok_folds]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def mean_f1_raw(self) -> float:
        return self._mean("f1_raw")

    @property
    def mean_f1_smoothed(self) -> float:
        return self._mean("f1_smoothed")

    @property
    def mean_gate_f1(self) -> float:
        return self._mean("gate_f1")

    def total_confusion(self, smoothed: bool = False) -> np.ndarray:
        attr = "confusion_smoothed" if smoothed else "confusion_raw"
        mats = [getattr(f, attr) for f in self.ok_folds]
        return np.sum(mats, axis=0) if mats else np.zeros((9, 9), dtype=np.int64)

    def summary(self) -> dict:
        total_raw = self.total_confusion(False)
        total_s = self.total_confusion(True)
        return {
            "n_folds": len(self.folds),
            "n_failed": len(self.folds) - len(self.ok_folds),
            "mean_macro_f1": _r(self.mean_f1_raw),
            "mean_macro_f1_smoothed": _r(self.mean_f1_smoothed),
            "pooled_macro_f1": _r(macro_f1(total_raw)),
            "pooled_macro_f1_smoothed": _r(macro_f1(total_s)),
            "mean_gate_f1": _r(self.mean_gate_f1),
            "mean_gating_savings": _r(self._mean("gating_savings")),
            "smoothing": {"max_gap": self.config.max_gap, "k": self.config.k},
            "folds": [
                {
                    "test_session": f.test_session,
                    "macro_f1": _r(f.f1_raw),
                    "macro_f1_smoothed": _r(f.f1_smoothed),
                    "gate_f1": _r(f.gate_f1),
                    "gating_savings": _r(f.gating_savings),
                    "movement_threshold": _r(f.threshold),
                    "stage_counts": f.stage_counts,
                    "epochs_inertial": f.epochs[0],
                    "epochs_capacitive": f.epochs[1],
                    "error": f.error,
                }
                for f in self.folds
            ],
        }


def _r(v: float) -> float | None:
    return None if v is None or not np.isfinite(v) else round(float(v), 6)


def evaluate(cfg: EvalConfig, d: Dataset) -> EvalReport:
    """LOSO: train on all but one session, gate the held-out one, score windows."""
    folds = loso_folds(d)
    jobs = [(i, train, test, cfg) for i, (train, test) in enumerate(folds)]
    if cfg.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.n_jobs) as pool:
            results = list(pool.map(_run_fold, jobs))
    else:
        results = [_run_fold(j) for j in jobs]
    for r in results:
        if r.ok:
            log.info("fold %s: F1 %.4f (smoothed %.4f) in %.1fs", r.test_session, r.f1_raw, r.f1_smoothed, r.seconds)
    return EvalReport(results, cfg)


def quick_config(cfg: EvalConfig, max_epochs: int, patience: int | None = None) -> EvalConfig:
    """Same config with shorter training, for smoke runs and tests."""
    patience = min(patience or max_epochs, max_epochs)
    return replace(
        cfg,
        inertial_train=replace(cfg.inertial_train, max_epochs=max_epochs, patience=patience),
        capacitive_train=replace(cfg.capacitive_train, max_epochs=max_epochs, patience=patience),
    )
