"""Report figures: confusion-matrix heatmaps and per-fold F1 bars.

Rendered with the Agg backend and written without software/timestamp
metadata so repeated runs produce identical PNG bytes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from gesturegate import CLASS_NAMES  # noqa: E402

PNG_METADATA = {"Software": None}
DPI = 100


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="png", dpi=DPI, metadata=PNG_METADATA)
    plt.close(fig)
    return path


def plot_confusion(matrix: np.ndarray, path, title: str = "", normalize: bool = True) -> Path:
    """Heatmap of a 9x9 confusion matrix; rows are true classes.

    With ``normalize`` the colours are row fractions and each cell is
    annotated with its raw count.
    """
    m = np.asarray(matrix, dtype=float)
    rows = m.sum(axis=1, keepdims=True)
    shown = np.divide(m, rows, out=np.zeros_like(m), where=rows > 0) if normalize else m
    n = len(m)
    names = CLASS_NAMES[:n]

    fig, ax = plt.subplots(figsize=(6.4, 5.6))
    im = ax.imshow(shown, cmap="Blues", vmin=0, vmax=1 if normalize else None)
    fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    ax.set_xticks(range(n))
    ax.set_yticks(range(n))
    ax.set_xticklabels(names, rotation=45, ha="right")
    ax.set_yticklabels(names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    if title:
        ax.set_title(title)
    cutoff = 0.5 * (shown.max() if shown.size else 0)
    for i in range(n):
        for j in range(n):
            if m[i, j]:
                ax.text(j, i, f"{int(m[i, j])}", ha="center", va="center", fontsize=7,
                        color="white" if shown[i, j] > cutoff else "black")
    fig.tight_layout()
    return _save(fig, path)


def plot_fold_f1(fold_ids, f1_raw, f1_smoothed, path, target: float | None = None) -> Path:
    """Grouped bars of per-fold macro F1, unsmoothed next to smoothed."""
    x = np.arange(len(fold_ids))
    raw = np.nan_to_num(np.asarray(f1_raw, dtype=float))
    sm = np.nan_to_num(np.asarray(f1_smoothed, dtype=float))
    fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(x) + 2), 3.6))
    ax.bar(x - 0.2, raw, 0.4, label="unsmoothed")
    ax.bar(x + 0.2, sm, 0.4, label="smoothed")
    if target is not None:
        ax.axhline(target, color="k", lw=0.8, ls="--")
    ax.set_xticks(x)
    ax.set_xticklabels(fold_ids, rotation=45, ha="right", fontsize=8)
    ax.set_ylim(0, 1)
    ax.set_ylabel("macro F1")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    return _save(fig, path)
