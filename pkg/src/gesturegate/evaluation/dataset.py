"""Labeled sessions, the session CSV format, and dataset directories."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from gesturegate import N_CLASSES, NULL
from gesturegate.errors import DataError
from gesturegate.stream import WINDOW_LEN, WINDOW_STEP, SensorFrame, minmax_normalize, session_windows

COLUMNS = ("t", "ax", "ay", "az", "c1", "c2", "c3", "c4", "label")


@dataclass
class LabeledSession:
    id: str
    t: np.ndarray  # (n,)
    accel: np.ndarray  # (n, 3)
    cap: np.ndarray  # (n, 4)
    labels: np.ndarray  # (n,) int

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.accel = np.asarray(self.accel, dtype=np.float64).reshape(-1, 3)
        self.cap = np.asarray(self.cap, dtype=np.float64).reshape(-1, 4)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = len(self.t)
        if not (len(self.accel) == len(self.cap) == len(self.labels) == n):
            raise DataError(f"session {self.id}: column lengths differ")
        if n and (self.labels.min() < 0 or self.labels.max() >= N_CLASSES):
            raise DataError(f"session {self.id}: labels outside 0..{N_CLASSES - 1}")
        if n > 1 and not np.all(np.diff(self.t) > 0):
            bad = int(np.argmin(np.diff(self.t) > 0)) + 1
            raise DataError(f"session {self.id}: timestamps not strictly increasing at frame {bad}")

    def __len__(self) -> int:
        return len(self.t)

    def frames(self) -> Iterator[SensorFrame]:
        for i in range(len(self)):
            yield SensorFrame(float(self.t[i]), tuple(map(float, self.accel[i])), tuple(map(float, self.cap[i])))

    def leading_null(self) -> np.ndarray:
        """Acceleration of the initial Null segment (the stationary lead-in)."""
        nonnull = np.flatnonzero(self.labels != NULL)
        end = int(nonnull[0]) if nonnull.size else len(self)
        return self.accel[:end]


@dataclass
class Dataset:
    sessions: list[LabeledSession]

    def __post_init__(self):
        if not self.sessions:
            raise DataError("a dataset needs at least one session")
        ids = [s.id for s in self.sessions]
        if len(set(ids)) != len(ids):
            raise DataError(f"duplicate session ids in {ids}")

    def __len__(self) -> int:
        return len(self.sessions)


def window_label(session: LabeledSession, start: int, window_len: int = WINDOW_LEN) -> int:
    """Majority per-frame label over the window; ties go to Null."""
    if start < 0 or start + window_len > len(session):
        raise DataError(f"window [{start}, {start + window_len}) outside session of {len(session)} frames")
    return majority_label(session.labels[start : start + window_len])


def majority_label(frame_labels: np.ndarray) -> int:
    counts = np.bincount(frame_labels, minlength=N_CLASSES)
    top = counts.max()
    if counts[NULL] == top:
        return NULL
    return int(np.argmax(counts))


@dataclass
class SessionWindows:
    """Every window of a session as model-ready arrays."""

    starts: np.ndarray  # (m,)
    inertial: np.ndarray  # (m, 3, L) raw
    capacitive: np.ndarray  # (m, 4, L) raw
    labels: np.ndarray  # (m,)

    def normalized(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            minmax_normalize(self.inertial).astype(np.float32),
            minmax_normalize(self.capacitive).astype(np.float32),
        )


def windows_of(session: LabeledSession, window_len: int = WINDOW_LEN, step: int = WINDOW_STEP) -> SessionWindows:
    inertial = session_windows(session.accel, window_len, step)
    capacitive = session_windows(session.cap, window_len, step)
    starts = np.arange(len(inertial)) * step
    labels = np.array([window_label(session, int(s), window_len) for s in starts], dtype=np.int64)
    return SessionWindows(starts, inertial, capacitive, labels)


def write_session_csv(session: LabeledSession, path) -> None:
    buf = io.StringIO()
    buf.write(",".join(COLUMNS) + "\n")
    for i in range(len(session)):
        a = session.accel[i]
        c = session.cap[i]
        buf.write(
            f"{session.t[i]:.4f},{a[0]:.6f},{a[1]:.6f},{a[2]:.6f},"
            f"{c[0]:.3f},{c[1]:.3f},{c[2]:.3f},{c[3]:.3f},{int(session.labels[i])}\n"
        )
    Path(path).write_text(buf.getvalue())


def read_session_csv(path, session_id: str | None = None) -> LabeledSession:
    path = Path(path)
    sid = session_id or path.stem
    rows = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != COLUMNS:
            raise DataError(f"{path}:1: header must be {','.join(COLUMNS)}, got {header}")
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != len(COLUMNS):
                raise DataError(f"{path}:{lineno}: expected {len(COLUMNS)} fields, got {len(row)}")
            try:
                values = [float(v) for v in row[:-1]]
                label = int(row[-1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric field in {row}") from None
            if not np.all(np.isfinite(values)):
                raise DataError(f"{path}:{lineno}: non-finite value")
            if not 0 <= label < N_CLASSES:
                raise DataError(f"{path}:{lineno}: label {label} outside 0..{N_CLASSES - 1}")
            if rows and values[0] <= rows[-1][0]:
                raise DataError(f"{path}:{lineno}: timestamp {values[0]} does not exceed previous {rows[-1][0]}")
            rows.append((*values, label))
    if not rows:
        raise DataError(f"{path}: no frames")
    arr = np.array(rows, dtype=np.float64)
    return LabeledSession(sid, arr[:, 0], arr[:, 1:4], arr[:, 4:8], arr[:, 8].astype(np.int64))


def load_dataset(directory) -> Dataset:
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"dataset directory {directory} does not exist")
    files = sorted(directory.glob("*.csv"))
    if not files:
        raise DataError(f"no session CSV files in {directory}")
    return Dataset([read_session_csv(f) for f in files])


def save_dataset(dataset: Dataset | Sequence[LabeledSession], directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    sessions = dataset.sessions if isinstance(dataset, Dataset) else list(dataset)
    paths = []
    for s in sessions:
        p = directory / f"{s.id}.csv"
        write_session_csv(s, p)
        paths.append(p)
    return paths
