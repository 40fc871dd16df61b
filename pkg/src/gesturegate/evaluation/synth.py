"""Synthetic glove sessions.

Each session opens with a stationary Null lead-in, then performs every
gesture ``tries_per_gesture`` times in shuffled order, separated by Null
rests. During a gesture the wrist accelerometer oscillates on all three
axes; at rest it only carries sensor noise, which keeps it below the
calibrated movement threshold.

Capacitive templates are trains of raised-cosine pulses. A class is defined
by which electrodes respond (amplitude 1, others 0), the pulse period, the
pulse duty cycle, and a per-electrode phase lag::

    class     wrist thumb index little   period  duty
    Up(1)       0     0     1     0      0.8 s   0.5
    Down(2)     0     1     0     1      1.25 s  0.5
    Back(3)     1     0     0     0      1.25 s  0.3
    Forward(4)  0     0     1     1      0.8 s   0.3
    Land(5)     0     1     1     0      2.0 s   0.5
    Stop(6)     1     1     1     1      2.0 s   0.3
    Left(7)     0     1     0     0      0.8 s   0.3
    Right(8)    0     0     0     1      1.25 s  0.5

Raw capacitive values are ``baseline + cap_scale * signal`` in converter
counts. Everything is a pure function of ``(SynthConfig, seed)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from gesturegate import N_CLASSES, NULL
from gesturegate.config import format_kv, from_mapping, read_kv
from gesturegate.errors import ConfigError
from gesturegate.evaluation.dataset import Dataset, LabeledSession

ACTIVE = np.array(
    [
        [0, 0, 0, 0],
        [0, 0, 1, 0],
        [0, 1, 0, 1],
        [1, 0, 0, 0],
        [0, 0, 1, 1],
        [0, 1, 1, 0],
        [1, 1, 1, 1],
        [0, 1, 0, 0],
        [0, 0, 0, 1],
    ],
    dtype=np.float64,
)
PERIOD_S = np.array([0.0, 0.8, 1.25, 1.25, 0.8, 2.0, 2.0, 0.8, 1.25])
DUTY = np.array([0.0, 0.5, 0.5, 0.3, 0.3, 0.5, 0.3, 0.3, 0.5])
# phase lag of each electrode, as a fraction of the pulse period
LAG = np.array(
    [
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.5],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.25],
        [0.0, 0.0, 0.25, 0.0],
        [0.0, 0.1, 0.2, 0.3],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
    ]
)
BASELINE_COUNTS = np.array([152_000.0, 148_500.0, 161_200.0, 157_800.0])


@dataclass(frozen=True)
class SynthConfig:
    sample_rate: float = 50.0
    tries_per_gesture: int = 4
    gesture_seconds: float = 8.0
    rest_min_seconds: float = 3.0
    rest_max_seconds: float = 5.0
    lead_in_seconds: float = 4.0
    accel_amplitude: float = 2.0
    accel_noise: float = 0.05
    cap_scale: float = 2000.0
    cap_noise: float = 0.05
    cap_drift: float = 0.1
    amplitude_jitter: float = 0.2
    period_jitter: float = 0.05
    phase_jitter: bool = True

    def __post_init__(self):
        checks = {
            "sample_rate": self.sample_rate > 0,
            "tries_per_gesture": self.tries_per_gesture >= 1,
            "gesture_seconds": self.gesture_seconds > 0,
            "rest_min_seconds": 0 < self.rest_min_seconds <= self.rest_max_seconds,
            "lead_in_seconds": self.lead_in_seconds > 0,
            "accel_amplitude": self.accel_amplitude > 0,
            "accel_noise": self.accel_noise >= 0,
            "cap_scale": self.cap_scale > 0,
            "cap_noise": self.cap_noise >= 0,
            "cap_drift": self.cap_drift >= 0,
            "amplitude_jitter": 0 <= self.amplitude_jitter < 1,
            "period_jitter": 0 <= self.period_jitter < 0.5,
        }
        bad = [k for k, ok in checks.items() if not ok]
        if bad:
            raise ConfigError(f"invalid synthetic config values: {', '.join(bad)}")

    def to_text(self) -> str:
        return format_kv(asdict(self))

    @classmethod
    def from_file(cls, path) -> "SynthConfig":
        return from_mapping(cls, read_kv(path))


def capacitive_template(label: int, tau: np.ndarray, period_scale: float = 1.0, phase: float = 0.0) -> np.ndarray:
    """Noise-free unit-amplitude signal of a class, shape (len(tau), 4).

    ``tau`` is time in seconds since the gesture started.
    """
    if not 0 < label < N_CLASSES:
        raise ValueError(f"no capacitive template for label {label}")
    period = PERIOD_S[label] * period_scale
    u = tau[:, None] / period + phase - LAG[label][None, :]
    frac = u - np.floor(u)
    duty = DUTY[label]
    pulse = np.where(frac < duty, 0.5 * (1 - np.cos(2 * np.pi * frac / duty)), 0.0)
    return pulse * ACTIVE[label][None, :]


def _edge_envelope(n: int, ramp: int) -> np.ndarray:
    env = np.ones(n)
    ramp = min(ramp, n // 2)
    if ramp > 0:
        r = 0.5 * (1 - np.cos(np.pi * (np.arange(ramp) + 0.5) / ramp))
        env[:ramp] = r
        env[n - ramp :] = r[::-1]
    return env


def _smooth_walk(rng: np.random.Generator, n: int, width: int) -> np.ndarray:
    steps = rng.normal(size=n + width)
    kernel = np.hanning(width)
    walk = np.convolve(steps, kernel / kernel.sum(), mode="same")[:n]
    walk -= walk.mean()
    scale = np.abs(walk).max()
    return walk / scale if scale > 0 else walk


def gesture_order(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    return rng.permutation(np.repeat(np.arange(1, N_CLASSES), cfg.tries_per_gesture))


def synth_session(cfg: SynthConfig = SynthConfig(), seed: int = 0, session_id: str | None = None) -> LabeledSession:
    rng = np.random.default_rng(seed)
    fs = cfg.sample_rate
    n_gesture = int(round(cfg.gesture_seconds * fs))
    order = gesture_order(cfg, rng)
    rests = rng.uniform(cfg.rest_min_seconds, cfg.rest_max_seconds, size=len(order))

    seg_labels = [NULL]
    seg_lengths = [int(round(cfg.lead_in_seconds * fs))]
    for g, rest in zip(order, rests):
        seg_labels += [int(g), NULL]
        seg_lengths += [n_gesture, int(round(rest * fs))]

    n = sum(seg_lengths)
    accel = rng.normal(0.0, cfg.accel_noise, size=(n, 3)) if cfg.accel_noise else np.zeros((n, 3))
    signal = np.zeros((n, 4))
    labels = np.empty(n, dtype=np.int64)
    ramp = int(round(0.2 * fs))

    pos = 0
    for label, length in zip(seg_labels, seg_lengths):
        sl = slice(pos, pos + length)
        labels[sl] = label
        tau = np.arange(length) / fs
        if label == NULL:
            if cfg.cap_drift:
                signal[sl] = cfg.cap_drift * np.stack([_smooth_walk(rng, length, int(2 * fs)) for _ in range(4)], axis=1)
        else:
            period_scale = 1 + rng.uniform(-cfg.period_jitter, cfg.period_jitter)
            phase = rng.uniform(0, 1) if cfg.phase_jitter else 0.0
            amp = 1 + rng.uniform(-cfg.amplitude_jitter, cfg.amplitude_jitter, size=4)
            env = _edge_envelope(length, ramp)
            signal[sl] = capacitive_template(label, tau, period_scale, phase) * amp * env[:, None]
            freqs = rng.uniform(1.5, 2.5, size=3)
            phases = rng.uniform(0, 2 * math.pi, size=3)
            motion = np.sin(2 * math.pi * freqs[None, :] * tau[:, None] + phases[None, :])
            accel[sl] += cfg.accel_amplitude * motion
        pos += length

    if cfg.cap_noise:
        signal += rng.normal(0.0, cfg.cap_noise, size=signal.shape)
    cap = BASELINE_COUNTS[None, :] + cfg.cap_scale * signal
    t = np.arange(n) / fs
    return LabeledSession(session_id or f"session_{seed}", t, accel, cap, labels)


def synth_dataset(cfg: SynthConfig = SynthConfig(), n_sessions: int = 10, seed: int = 0) -> Dataset:
    if n_sessions < 1:
        raise ConfigError("n_sessions must be >= 1")
    seeds = np.random.SeedSequence(seed).generate_state(n_sessions)
    return Dataset([synth_session(cfg, int(s), f"session_{i:02d}") for i, s in enumerate(seeds)])
