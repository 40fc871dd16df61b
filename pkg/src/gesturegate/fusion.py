"""Three-stage power-gated recognition: movement gate, inertial model, capacitive model."""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from gesturegate import N_CLASSES, NULL
from gesturegate.errors import ConfigError, DataError
from gesturegate.nn.model import ModelWeights, model_forward
from gesturegate.nn.spec import ModelSpec
from gesturegate.stream import (
    WINDOW_LEN,
    WINDOW_STEP,
    SAMPLE_RATE_HZ,
    ChannelSet,
    MovementDetectorConfig,
    SensorFrame,
    Window,
    WindowBuffer,
    detect_movement,
    minmax_normalize,
    movement_score,
)

GESTURE = 1  # inertial model output index for "gesture present"


class Stage(enum.IntEnum):
    IDLE = 0
    INERTIAL = 1
    CAPACITIVE = 2

    @property
    def label(self) -> str:
        return ("Idle", "InertialActive", "CapacitiveActive")[self]

    @classmethod
    def parse(cls, text: str) -> "Stage":
        for s in cls:
            if text in (s.label, s.name, str(int(s))):
                return s
        raise DataError(f"unknown stage {text!r}")


@dataclass(frozen=True)
class PowerModel:
    idle_watts: float = 0.84
    inertial_watts: float = 0.94
    full_watts: float = 1.15

    def __post_init__(self):
        if not 0 < self.idle_watts <= self.inertial_watts <= self.full_watts:
            raise ConfigError(
                f"need 0 < idle <= inertial <= full watts, got "
                f"{self.idle_watts}, {self.inertial_watts}, {self.full_watts}"
            )

    def watts(self, stage: Stage) -> float:
        return (self.idle_watts, self.inertial_watts, self.full_watts)[Stage(stage)]


@dataclass(frozen=True)
class GateState:
    stage: Stage = Stage.IDLE
    last_decision: int | None = None
    window_clock: int = -1


@dataclass(frozen=True)
class RecognitionEvent:
    window_start_index: int
    label: int
    confidence: float
    stage_reached: Stage
    power_watts: float

    def __post_init__(self):
        if not 0 <= self.label < N_CLASSES:
            raise DataError(f"label {self.label} outside 0..{N_CLASSES - 1}")
        if self.stage_reached < Stage.CAPACITIVE and self.label != NULL:
            raise DataError("only the capacitive stage may emit a non-null label")
        if not 0.0 <= self.confidence <= 1.0:
            raise DataError(f"confidence {self.confidence} outside [0, 1]")

    def to_line(self) -> str:
        return (
            f"{self.window_start_index}\t{self.label}\t{self.confidence:.6f}\t"
            f"{self.stage_reached.label}\t{self.power_watts:.2f}"
        )

    @classmethod
    def from_line(cls, line: str) -> "RecognitionEvent":
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 5:
            raise DataError(f"event line needs 5 tab-separated fields, got {len(parts)}: {line!r}")
        try:
            return cls(int(parts[0]), int(parts[1]), float(parts[2]), Stage.parse(parts[3]), float(parts[4]))
        except ValueError as exc:
            raise DataError(f"bad event line {line!r}: {exc}") from exc


class Classifier:
    """A model plus an invocation counter, so tests can observe laziness."""

    def __init__(self, spec: ModelSpec, weights: ModelWeights):
        self.spec = spec
        self.weights = weights
        self.calls = 0

    def predict_proba(self, window_data: np.ndarray) -> np.ndarray:
        self.calls += 1
        return model_forward(self.spec, self.weights, window_data)


@dataclass
class GateModels:
    inertial: Classifier
    capacitive: Classifier

    def reset_counts(self) -> None:
        self.inertial.calls = 0
        self.capacitive.calls = 0


def gate_step(
    state: GateState,
    inertial_window: Window,
    capacitive_window: Window,
    models: GateModels,
    detector_cfg: MovementDetectorConfig,
    power: PowerModel = PowerModel(),
) -> tuple[GateState, RecognitionEvent]:
    """Advance the gate by one window step.

    Movement is scored on the trailing ``span`` frames of the raw inertial
    window. Each model only runs if the previous stage let the window through.
    For an idle step the reported confidence is 1.0; for an inertial-stage
    null it is the inertial model's null probability.
    """
    if inertial_window.channel_set is not ChannelSet.INERTIAL3 or capacitive_window.channel_set is not ChannelSet.CAPACITIVE4:
        raise DataError("gate_step needs an inertial and a capacitive window, in that order")
    if (inertial_window.start_index, inertial_window.length) != (capacitive_window.start_index, capacitive_window.length):
        raise DataError(
            f"window span mismatch: inertial {inertial_window.start_index}+{inertial_window.length}, "
            f"capacitive {capacitive_window.start_index}+{capacitive_window.length}"
        )
    if inertial_window.normalized or capacitive_window.normalized:
        raise DataError("gate_step expects raw (un-normalized) windows")
    start = inertial_window.start_index

    tail = inertial_window.data[:, -detector_cfg.span :].T
    if not detect_movement(movement_score(tail, detector_cfg.span), detector_cfg):
        event = RecognitionEvent(start, NULL, 1.0, Stage.IDLE, power.idle_watts)
        return GateState(Stage.IDLE, NULL, start), event

    p_inertial = models.inertial.predict_proba(minmax_normalize(inertial_window.data))
    if int(np.argmax(p_inertial)) != GESTURE:
        conf = float(np.clip(p_inertial[NULL], 0.0, 1.0))
        event = RecognitionEvent(start, NULL, conf, Stage.INERTIAL, power.inertial_watts)
        return GateState(Stage.INERTIAL, NULL, start), event

    p_cap = models.capacitive.predict_proba(minmax_normalize(capacitive_window.data))
    label = int(np.argmax(p_cap))
    event = RecognitionEvent(start, label, float(np.clip(p_cap[label], 0.0, 1.0)), Stage.CAPACITIVE, power.full_watts)
    return GateState(Stage.CAPACITIVE, label, start), event


class FusionPipeline:
    """Frame-in, event-out wrapper around a :class:`WindowBuffer` and :func:`gate_step`."""

    def __init__(
        self,
        models: GateModels,
        detector_cfg: MovementDetectorConfig,
        power: PowerModel = PowerModel(),
        window_len: int = WINDOW_LEN,
        step: int = WINDOW_STEP,
    ):
        if detector_cfg.span > window_len:
            raise ConfigError(f"movement span {detector_cfg.span} exceeds window length {window_len}")
        self.models = models
        self.detector_cfg = detector_cfg
        self.power = power
        self.buffer = WindowBuffer(window_len, step)
        self.state = GateState()

    def push(self, frame: SensorFrame) -> RecognitionEvent | None:
        windows = self.buffer.push_frame(frame)
        if windows is None:
            return None
        self.state, event = gate_step(self.state, *windows, self.models, self.detector_cfg, self.power)
        return event

    def run_arrays(self, accel: np.ndarray, cap: np.ndarray, t: np.ndarray | None = None) -> list[RecognitionEvent]:
        """Replay a whole recording given as (n, 3) and (n, 4) arrays."""
        n = len(accel)
        if t is None:
            t = np.arange(n) / SAMPLE_RATE_HZ
        events = []
        for i in range(n):
            frame = SensorFrame(float(t[i]), tuple(map(float, accel[i])), tuple(map(float, cap[i])))
            ev = self.push(frame)
            if ev is not None:
                events.append(ev)
        return events


def session_energy(timeline: Iterable[tuple[float, Stage]], power: PowerModel = PowerModel()) -> tuple[float, float]:
    """Total joules and average watts over ``(duration_s, stage)`` pairs."""
    joules = 0.0
    total = 0.0
    for duration, stage in timeline:
        if duration < 0:
            raise DataError(f"negative duration {duration}")
        joules += duration * power.watts(stage)
        total += duration
    if total == 0:
        raise DataError("average power undefined for zero total duration")
    return joules, joules / total


def gating_savings(events: Sequence[RecognitionEvent], power: PowerModel = PowerModel()) -> float:
    """Fractional power saved relative to running every stage on every window step."""
    if not events:
        raise DataError("gating_savings needs at least one event")
    gated = math.fsum(e.power_watts for e in events) / len(events)
    return 1.0 - gated / power.full_watts


def smoothed_line(event: RecognitionEvent, label: int) -> str:
    """Event line with the label replaced by a smoothed one.

    Stage and watts stay as measured, so a smoothed line may carry a gesture
    label at a sub-capacitive stage; such lines are output only, not events.
    """
    return f"{event.window_start_index}\t{label}\t{event.confidence:.6f}\t{event.stage_reached.label}\t{event.power_watts:.2f}"


def read_label_column(lines: Iterable[str]) -> tuple[list[int], list[int]]:
    """Window start indices and labels from event lines (smoothed or raw)."""
    starts, labels = [], []
    for lineno, line in enumerate(lines, 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.rstrip("\n").split("\t")
        try:
            start, label = int(parts[0]), int(parts[1])
        except (IndexError, ValueError):
            raise DataError(f"line {lineno}: expected '<window_start>\\t<label>\\t...', got {line!r}") from None
        if not 0 <= label < N_CLASSES:
            raise DataError(f"line {lineno}: label {label} outside 0..{N_CLASSES - 1}")
        starts.append(start)
        labels.append(label)
    return starts, labels


def replay(
    pipeline: FusionPipeline,
    t: np.ndarray,
    accel: np.ndarray,
    cap: np.ndarray,
    paced: bool = False,
    on_event=None,
    clock=time.perf_counter,
    sleep=time.sleep,
) -> list[float]:
    """Feed a recording frame by frame; return per-window-step compute latencies in seconds.

    With ``paced`` each frame is released at its recorded timestamp relative
    to the first one, so ingestion runs at the recording rate (50 Hz). The
    latency of a step is the time ``push`` takes on the frame that completes
    a window, which includes both model calls when the gate opens.
    """
    latencies = []
    t0 = clock()
    for i in range(len(t)):
        if paced:
            wait = t0 + (t[i] - t[0]) - clock()
            if wait > 0:
                sleep(wait)
        frame = SensorFrame(float(t[i]), tuple(map(float, accel[i])), tuple(map(float, cap[i])))
        started = clock()
        ev = pipeline.push(frame)
        if ev is not None:
            latencies.append(clock() - started)
            if on_event is not None:
                on_event(ev)
    return latencies
