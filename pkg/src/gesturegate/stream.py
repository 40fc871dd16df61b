"""Frame ingestion, sliding windows, per-window normalization and the movement gate.

A glove frame carries 3 axes of linear acceleration and 4 capacitive channels
(wrist, thumb, index, little finger) sampled at roughly 50 Hz. Windows are
defined in samples: 100 frames long, advanced by 25.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from gesturegate.errors import ConfigError, DataError, FrameOrderError

SAMPLE_RATE_HZ = 50.0
WINDOW_LEN = 100
WINDOW_STEP = 25
MOVEMENT_SPAN = 6

CAP_CHANNELS = ("wrist", "thumb", "index", "little")
ACCEL_AXES = ("ax", "ay", "az")

# below this range a channel is treated as constant
CONSTANT_RANGE = 1e-8


class ChannelSet(enum.Enum):
    INERTIAL3 = "Inertial3"
    CAPACITIVE4 = "Capacitive4"

    @property
    def n_channels(self) -> int:
        return 3 if self is ChannelSet.INERTIAL3 else 4


@dataclass(frozen=True)
class SensorFrame:
    t: float
    accel: tuple[float, float, float]
    cap: tuple[float, float, float, float]

    def __post_init__(self):
        if len(self.accel) != 3:
            raise DataError(f"accel needs 3 entries, got {len(self.accel)}")
        if len(self.cap) != 4:
            raise DataError(f"cap needs 4 entries, got {len(self.cap)}")
        values = (self.t, *self.accel, *self.cap)
        if not all(math.isfinite(v) for v in values):
            raise DataError(f"non-finite value in frame at t={self.t}")


@dataclass
class Window:
    data: np.ndarray  # (channels, length)
    channel_set: ChannelSet
    normalized: bool = False
    start_index: int = 0

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 2 or self.data.shape[0] != self.channel_set.n_channels:
            raise DataError(
                f"{self.channel_set.value} window needs shape "
                f"({self.channel_set.n_channels}, L), got {self.data.shape}"
            )

    @property
    def length(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class MovementDetectorConfig:
    threshold: float
    span: int = MOVEMENT_SPAN

    def __post_init__(self):
        if self.span < 1:
            raise ConfigError(f"movement span must be >= 1, got {self.span}")
        if not (self.threshold >= 0 and math.isfinite(self.threshold)):
            raise ConfigError(f"movement threshold must be finite and >= 0, got {self.threshold}")


def window_count(n_frames: int, window_len: int = WINDOW_LEN, step: int = WINDOW_STEP) -> int:
    if n_frames < window_len:
        return 0
    return (n_frames - window_len) // step + 1


@dataclass
class WindowBuffer:
    """Sequential sliding-window assembler.

    Window k covers frames ``[k*step, k*step + window_len)``. Only the last
    ``window_len`` frames are kept. Not safe for concurrent writers.
    """

    window_len: int = WINDOW_LEN
    step: int = WINDOW_STEP
    n_seen: int = 0
    last_t: float = -math.inf
    _rows: deque = field(default_factory=deque, repr=False)

    def __post_init__(self):
        if self.window_len < 1 or self.step < 1:
            raise ConfigError("window_len and step must be >= 1")
        self._rows = deque(maxlen=self.window_len)

    def push_frame(self, frame: SensorFrame) -> tuple[Window, Window] | None:
        """Add a frame; return ``(inertial, capacitive)`` windows on a boundary."""
        if not frame.t > self.last_t:
            raise FrameOrderError(
                f"frame {self.n_seen}: timestamp {frame.t} does not exceed {self.last_t}"
            )
        self.last_t = frame.t
        self._rows.append((*frame.accel, *frame.cap))
        self.n_seen += 1

        start = self.n_seen - self.window_len
        if start < 0 or start % self.step:
            return None
        block = np.array(self._rows, dtype=np.float64).T
        return (
            Window(block[:3], ChannelSet.INERTIAL3, start_index=start),
            Window(block[3:], ChannelSet.CAPACITIVE4, start_index=start),
        )

    def recent_accel(self, n: int) -> np.ndarray:
        """Last ``n`` acceleration rows, shape (n, 3)."""
        rows = list(self._rows)[-n:]
        return np.array([r[:3] for r in rows], dtype=np.float64)


def session_windows(
    signal: np.ndarray, window_len: int = WINDOW_LEN, step: int = WINDOW_STEP
) -> np.ndarray:
    """All windows of a (n_frames, channels) array as (n_windows, channels, window_len).

    Produces the same windows, in the same order, as feeding the frames through
    a :class:`WindowBuffer`.
    """
    signal = np.asarray(signal)
    if signal.shape[0] < window_len:
        return np.empty((0, signal.shape[1], window_len), dtype=signal.dtype)
    views = sliding_window_view(signal, window_len, axis=0)[::step]
    return np.ascontiguousarray(views)


def minmax_normalize(data: np.ndarray) -> np.ndarray:
    """Min-max scale each channel (row, along the last axis) to [0, 1].

    Works on (channels, length) or (batch, channels, length). Constant
    channels become zeros.
    """
    data = np.asarray(data, dtype=np.float64)
    if not np.all(np.isfinite(data)):
        raise DataError("cannot normalize a window containing non-finite values")
    lo = data.min(axis=-1, keepdims=True)
    span = data.max(axis=-1, keepdims=True) - lo
    flat = span < CONSTANT_RANGE
    out = (data - lo) / np.where(flat, 1.0, span)
    out = np.where(flat, 0.0, out)
    return np.clip(out, 0.0, 1.0)


def normalize_window(w: Window) -> Window:
    if w.normalized:
        raise DataError("window is already normalized")
    return Window(minmax_normalize(w.data), w.channel_set, True, w.start_index)


def _as_accel_rows(frames) -> np.ndarray:
    if isinstance(frames, np.ndarray):
        return np.asarray(frames, dtype=np.float64).reshape(-1, 3)
    return np.array([f.accel for f in frames], dtype=np.float64).reshape(-1, 3)


def movement_score(frames: Sequence[SensorFrame] | np.ndarray, span: int = MOVEMENT_SPAN) -> float:
    """Sum of |ax| + |ay| + |az| over exactly ``span`` frames."""
    accel = _as_accel_rows(frames)
    if accel.shape[0] != span:
        raise DataError(f"movement score needs exactly {span} frames, got {accel.shape[0]}")
    return float(np.abs(accel).sum())


def detect_movement(score: float, cfg: MovementDetectorConfig) -> bool:
    return score > cfg.threshold


def movement_scores(accel: np.ndarray, span: int = MOVEMENT_SPAN) -> np.ndarray:
    """Scores of every length-``span`` run in an (n, 3) acceleration array."""
    mag = np.abs(np.asarray(accel, dtype=np.float64)).sum(axis=1)
    if mag.size < span:
        return np.empty(0)
    return sliding_window_view(mag, span).sum(axis=1)


def calibrate_threshold(stationary_accel: np.ndarray, span: int = MOVEMENT_SPAN, k: float = 3.0) -> float:
    """mean + k*std of the movement score over a stationary segment."""
    scores = movement_scores(stationary_accel, span)
    if scores.size == 0:
        raise DataError(f"calibration segment shorter than span {span}")
    return float(scores.mean() + k * scores.std())
