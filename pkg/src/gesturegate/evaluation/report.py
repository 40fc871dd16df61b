"""Write an :class:`EvalReport` to disk.

Layout under the output directory::

    summary.json                  scores, per-fold details, config
    confusion_raw.csv             summed over folds, unsmoothed
    confusion_smoothed.csv        summed over folds, smoothed
    folds/<session>_raw.csv       per-fold matrices
    folds/<session>_smoothed.csv
    figures/confusion_raw.png
    figures/confusion_smoothed.png
    figures/fold_f1.png

Matrix CSVs have a header row of predicted class names and one row per true
class, first column the true class name. Nothing written depends on wall-clock
time, so a fixed seed gives byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from gesturegate import CLASS_NAMES
from gesturegate.evaluation.crossval import EvalReport

ACCEPT_F1 = 0.90


def matrix_csv(matrix: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n = len(matrix)
    w.writerow(["true\\pred", *CLASS_NAMES[:n]])
    for name, row in zip(CLASS_NAMES, matrix):
        w.writerow([name, *(int(v) for v in row)])
    return buf.getvalue()


def read_matrix_csv(path) -> np.ndarray:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    return np.array([[int(v) for v in r[1:]] for r in rows[1:]], dtype=np.int64)


def _config_dict(report: EvalReport) -> dict:
    cfg = asdict(report.config)
    cfg.pop("n_jobs", None)  # does not affect results
    return cfg


def write_report(report: EvalReport, out_dir, figures: bool = True) -> list[Path]:
    from gesturegate.plotting import plot_confusion, plot_fold_f1

    out = Path(out_dir)
    (out / "folds").mkdir(parents=True, exist_ok=True)
    written = []

    summary = report.summary()
    summary["config"] = _config_dict(report)
    p = out / "summary.json"
    p.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    written.append(p)

    for smoothed, tag in ((False, "raw"), (True, "smoothed")):
        p = out / f"confusion_{tag}.csv"
        p.write_text(matrix_csv(report.total_confusion(smoothed)))
        written.append(p)
        for f in report.ok_folds:
            p = out / "folds" / f"{f.test_session}_{tag}.csv"
            p.write_text(matrix_csv(f.confusion_smoothed if smoothed else f.confusion_raw))
            written.append(p)

    if figures:
        fig_dir = out / "figures"
        written.append(plot_confusion(report.total_confusion(False), fig_dir / "confusion_raw.png", "unsmoothed"))
        written.append(plot_confusion(report.total_confusion(True), fig_dir / "confusion_smoothed.png", "smoothed"))
        ids = [f.test_session for f in report.folds]
        written.append(
            plot_fold_f1(ids, [f.f1_raw for f in report.folds], [f.f1_smoothed for f in report.folds],
                         fig_dir / "fold_f1.png", ACCEPT_F1)
        )
    return written
