"""Temporal smoothing of per-window label streams.

Labels arrive one per window step (0.5 s). ``gap_fill`` repairs short
dissenting runs between two runs of the same label, ``majority_smooth`` is a
centered vote, and ``events_from_labels`` merges runs into gesture events.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass
from typing import Iterable, Sequence

from gesturegate import N_CLASSES
from gesturegate.errors import ConfigError, DataError

DEFAULT_MAX_GAP = 1
DEFAULT_K = 5


@dataclass(frozen=True)
class GestureEvent:
    label: int
    start_window: int
    end_window: int  # exclusive

    def __post_init__(self):
        if not self.start_window < self.end_window:
            raise DataError(f"empty event {self}")

    def to_line(self) -> str:
        return f"{self.label},{self.start_window},{self.end_window}"


def _check(labels: Sequence[int]) -> list[int]:
    out = [int(v) for v in labels]
    for v in out:
        if not 0 <= v < N_CLASSES:
            raise DataError(f"label {v} outside 0..{N_CLASSES - 1}")
    return out


def runs(labels: Sequence[int]) -> list[tuple[int, int, int]]:
    """Maximal runs as ``(label, start, end)``."""
    out = []
    start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[start]:
            out.append((labels[start], start, i))
            start = i
    return out


def gap_fill(labels: Sequence[int], max_gap: int = DEFAULT_MAX_GAP) -> list[int]:
    """Rewrite runs of at most ``max_gap`` windows whose two flanking runs agree.

    Each pass judges all runs on the stream as it stood before the pass;
    passes repeat until nothing changes, which makes the result idempotent.
    The first and last runs are never rewritten.
    """
    if max_gap < 1:
        raise ConfigError(f"max_gap must be >= 1, got {max_gap}")
    out = _check(labels)
    while True:
        rs = runs(out)
        changed = False
        for j in range(1, len(rs) - 1):
            _, start, end = rs[j]
            left, right = rs[j - 1][0], rs[j + 1][0]
            if end - start <= max_gap and left == right:
                out[start:end] = [left] * (end - start)
                changed = True
        if not changed:
            return out


def _vote(window: Sequence[int], original: int) -> int:
    counts = Counter(window)
    top = max(counts.values())
    if counts[original] == top:
        return original
    # several non-original labels tied: take the smallest for determinism
    return min(lab for lab, c in counts.items() if c == top)


def majority_smooth(labels: Sequence[int], k: int = DEFAULT_K) -> list[int]:
    """Centered majority vote over ``k`` windows, truncated at the edges; ties keep the original."""
    if k < 1 or k % 2 == 0:
        raise ConfigError(f"majority window k must be odd and >= 1, got {k}")
    labels = _check(labels)
    half = k // 2
    n = len(labels)
    return [_vote(labels[max(0, i - half) : min(n, i + half + 1)], labels[i]) for i in range(n)]


class StreamingMajority:
    """Online version of :func:`majority_smooth` with a fixed lag of ``k // 2`` windows.

    ``push`` returns the smoothed label for the window ``k // 2`` steps back
    (None while filling); ``flush`` emits the remaining tail.
    """

    def __init__(self, k: int = DEFAULT_K):
        if k < 1 or k % 2 == 0:
            raise ConfigError(f"majority window k must be odd and >= 1, got {k}")
        self.half = k // 2
        self._buf: deque[int] = deque()
        self._pending = 0  # index into _buf of the next window to emit

    @property
    def lag(self) -> int:
        return self.half

    def push(self, label: int) -> int | None:
        self._buf.append(int(label))
        if len(self._buf) - 1 - self._pending < self.half:
            return None
        return self._emit()

    def _emit(self) -> int:
        i = self._pending
        lo = max(0, i - self.half)
        window = list(self._buf)[lo : i + self.half + 1]
        out = _vote(window, self._buf[i])
        self._pending += 1
        if self._pending > self.half:
            self._buf.popleft()
            self._pending -= 1
        return out

    def flush(self) -> list[int]:
        out = []
        while self._pending < len(self._buf):
            out.append(self._emit())
        return out


def smooth(labels: Sequence[int], max_gap: int = DEFAULT_MAX_GAP, k: int = DEFAULT_K) -> list[int]:
    """Default offline chain: gap fill, then centered majority vote."""
    return majority_smooth(gap_fill(labels, max_gap), k)


def events_from_labels(labels: Sequence[int]) -> list[GestureEvent]:
    return [GestureEvent(lab, s, e) for lab, s, e in runs(_check(labels))]


def labels_from_events(events: Iterable[GestureEvent]) -> list[int]:
    out: list[int] = []
    for ev in events:
        if ev.start_window != len(out):
            raise DataError(f"event {ev} does not start where the previous one ended ({len(out)})")
        out.extend([ev.label] * (ev.end_window - ev.start_window))
    return out
