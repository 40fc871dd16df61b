"""Command-line entry point: generate | train | eval | stream | events.

Option values resolve as flag > ``--config`` file > built-in default; for
``stream`` the settings saved by ``train`` sit just above the defaults. Config
files are flat ``key = value`` text; keys are the long flag names (dashes or
underscores). ``generate`` also accepts every synthetic-generator field.

Exit status: 0 success, 2 config/usage error, 3 data error, 4 model error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from collections import deque
from pathlib import Path

import numpy as np

from gesturegate import __version__
from gesturegate.config import format_kv, from_mapping, read_kv
from gesturegate.errors import ConfigError, DataError, GestureGateError, ModelError
from gesturegate.evaluation.crossval import EvalConfig, evaluate, train_pipeline
from gesturegate.evaluation.dataset import load_dataset, read_session_csv, save_dataset
from gesturegate.evaluation.report import write_report
from gesturegate.evaluation.synth import SynthConfig, synth_dataset
from gesturegate.fusion import (
    Classifier,
    FusionPipeline,
    GateModels,
    PowerModel,
    read_label_column,
    replay,
    smoothed_line,
)
from gesturegate.nn.serialize import load_model, save_model
from gesturegate.nn.train import CAPACITIVE_TRAIN, INERTIAL_TRAIN
from gesturegate.smoothing import DEFAULT_K, DEFAULT_MAX_GAP, StreamingMajority, events_from_labels, smooth
from gesturegate.stream import MOVEMENT_SPAN, WINDOW_LEN, WINDOW_STEP, MovementDetectorConfig

log = logging.getLogger("gesturegate")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_MODEL = 0, 2, 3, 4

INERTIAL_FILE = "inertial.ggnn"
CAPACITIVE_FILE = "capacitive.ggnn"
PIPELINE_FILE = "pipeline.cfg"
HISTORY_FILE = "history.json"

# default for every option that may also come from a config file
DEFAULTS = {
    "seed": 0,
    "sessions": 10,
    "window_len": WINDOW_LEN,
    "step": WINDOW_STEP,
    "train_step": EvalConfig.train_step,
    "span": MOVEMENT_SPAN,
    "threshold": None,
    "idle_watts": PowerModel.idle_watts,
    "inertial_watts": PowerModel.inertial_watts,
    "full_watts": PowerModel.full_watts,
    "smoothing": "off",
    "max_gap": DEFAULT_MAX_GAP,
    "k": DEFAULT_K,
    "max_epochs": None,  # None: 100 inertial / 200 capacitive
    "patience": INERTIAL_TRAIN.patience,
    "batch_size": INERTIAL_TRAIN.batch_size,
    "jobs": 1,
    "figures": "on",
    "paced": False,
}


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _on_off(text: str) -> str:
    lowered = text.lower()
    if lowered in ("on", "true", "1", "yes"):
        return "on"
    if lowered in ("off", "false", "0", "no"):
        return "off"
    raise argparse.ArgumentTypeError(f"expected on/off, got {text!r}")


def _bool(text) -> bool:
    return text if isinstance(text, bool) else _on_off(str(text)) == "on"


def _optional_float(text: str):
    return None if str(text).lower() in ("none", "auto", "") else float(text)


def _common(p):
    p.add_argument("--config", type=Path, help="flat key = value file; flags override it")
    p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _window(p):
    p.add_argument("--window-len", type=int, default=None, help="frames per window (default 100)")
    p.add_argument("--step", type=int, default=None, help="frames between windows (default 25)")
    p.add_argument("--span", type=int, default=None, help="movement-score span in frames (default 6)")
    p.add_argument("--threshold", type=_optional_float, default=None,
                   help="movement threshold; default: calibrated from stationary lead-ins")


def _power(p):
    p.add_argument("--idle-watts", type=float, default=None)
    p.add_argument("--inertial-watts", type=float, default=None)
    p.add_argument("--full-watts", type=float, default=None)


def _smoothing(p, default="off"):
    p.add_argument("--smoothing", type=_on_off, default=None, help=f"on|off (default {default})")
    p.add_argument("--max-gap", type=int, default=None, help="gap-fill run length (default 1)")
    p.add_argument("--k", type=int, default=None, help="majority window (default 5)")


def _training(p):
    p.add_argument("--max-epochs", type=int, default=None, help="cap on epochs (default 100 inertial, 200 capacitive)")
    p.add_argument("--patience", type=int, default=None, help="early-stopping patience (default 30)")
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--train-step", type=int, default=None, help="stride of training windows (default 100)")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="gesturegate", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    p = sub.add_parser("generate", help="write synthetic session CSVs")
    _common(p)
    p.add_argument("--out", type=Path, required=True, help="dataset directory to write")
    p.add_argument("--sessions", type=int, default=None, help="number of sessions (default 10)")

    p = sub.add_parser("train", help="train both models on a dataset")
    _common(p)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="model directory to write")
    _window(p)
    _training(p)

    p = sub.add_parser("eval", help="leave-one-session-out evaluation")
    _common(p)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="report directory to write")
    p.add_argument("--jobs", type=int, default=None, help="folds to run in parallel (default 1)")
    p.add_argument("--figures", type=_on_off, default=None, help="render PNG figures (default on)")
    _window(p)
    _training(p)
    _power(p)
    _smoothing(p)

    p = sub.add_parser("stream", help="replay a session CSV through the gate")
    _common(p)
    p.add_argument("--models", type=Path, required=True, help="directory written by train")
    p.add_argument("--input", type=Path, required=True, help="session CSV to replay")
    p.add_argument("--paced", action="store_true", default=None, help="release frames at their timestamps (50 Hz)")
    p.add_argument("--latency", type=Path, help="write per-step compute latencies (ms) here")
    _window(p)
    _power(p)
    _smoothing(p)

    p = sub.add_parser("events", help="merge event lines into label,start,end runs")
    _common(p)
    p.add_argument("--input", type=Path, help="event lines (default stdin)")
    _smoothing(p)
    return parser


def resolve(args: argparse.Namespace, parser_for: dict, fallback: dict | None = None) -> tuple[argparse.Namespace, dict]:
    """Fill unset options from the config file, then ``fallback``, then DEFAULTS.

    Returns the namespace and the config-file entries no option claimed.
    """
    file_values = read_kv(args.config) if getattr(args, "config", None) else {}
    actions = {a.dest: a for a in parser_for[args.command]._actions}
    extra = {}
    for source, values in ((args.config, file_values), ("saved settings", fallback or {})):
        for key, text in values.items():
            if key not in actions or key in ("config", "help"):
                if values is file_values:
                    extra[key] = text
                continue
            if getattr(args, key) is None:
                conv = actions[key].type or (_bool if key == "paced" else str)
                try:
                    setattr(args, key, conv(text))
                except (ValueError, argparse.ArgumentTypeError) as exc:
                    raise ConfigError(f"{source}: {key} = {text!r}: {exc}") from None
    for key in actions:
        if key in DEFAULTS and getattr(args, key) is None:
            setattr(args, key, DEFAULTS[key])
    return args, extra


def _reject_extra(extra: dict, command: str) -> None:
    if extra:
        raise ConfigError(f"unknown config keys for {command}: {', '.join(sorted(extra))}")


def _eval_config(args) -> EvalConfig:
    def train_cfg(base):
        epochs = args.max_epochs or base.max_epochs
        return dataclasses.replace(base, max_epochs=epochs, patience=min(args.patience, epochs),
                                   batch_size=args.batch_size)

    try:
        return EvalConfig(
            window_len=args.window_len,
            step=args.step,
            train_step=args.train_step,
            span=args.span,
            threshold=args.threshold,
            inertial_train=train_cfg(INERTIAL_TRAIN),
            capacitive_train=train_cfg(CAPACITIVE_TRAIN),
            power=_power_model(args) if hasattr(args, "idle_watts") else PowerModel(),
            max_gap=getattr(args, "max_gap", DEFAULT_MAX_GAP),
            k=getattr(args, "k", DEFAULT_K),
            seed=args.seed,
            n_jobs=getattr(args, "jobs", 1),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _power_model(args) -> PowerModel:
    return PowerModel(args.idle_watts, args.inertial_watts, args.full_watts)


def cmd_generate(args, extra) -> int:
    cfg = from_mapping(SynthConfig, extra)
    if args.sessions < 1:
        raise ConfigError("--sessions must be >= 1")
    d = synth_dataset(cfg, args.sessions, args.seed)
    try:
        paths = save_dataset(d, args.out)
        (args.out / "synth.cfg").write_text(f"# seed = {args.seed}\n" + cfg.to_text())
    except OSError as exc:
        raise DataError(f"cannot write dataset to {args.out}: {exc.strerror or exc}") from exc
    print(f"wrote {len(paths)} sessions to {args.out}")
    return EXIT_OK


def cmd_train(args, extra) -> int:
    _reject_extra(extra, "train")
    cfg = _eval_config(args)
    d = load_dataset(args.dataset)
    pipe = train_pipeline(d.sessions, cfg)
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        n_i = save_model(args.out / INERTIAL_FILE, *pipe.inertial)
        n_c = save_model(args.out / CAPACITIVE_FILE, *pipe.capacitive)
        settings = {
            "window_len": cfg.window_len,
            "step": cfg.step,
            "span": pipe.detector.span,
            "threshold": pipe.detector.threshold,
        }
        (args.out / PIPELINE_FILE).write_text(format_kv(settings))
        history = {"inertial": pipe.inertial_history, "capacitive": pipe.capacitive_history}
        (args.out / HISTORY_FILE).write_text(json.dumps(history, indent=1, sort_keys=True) + "\n")
    except OSError as exc:
        raise DataError(f"cannot write models to {args.out}: {exc.strerror or exc}") from exc
    print(f"inertial model: {n_i} bytes, {len(pipe.inertial_history)} epochs")
    print(f"capacitive model: {n_c} bytes, {len(pipe.capacitive_history)} epochs")
    print(f"movement threshold: {pipe.detector.threshold:.6g}")
    return EXIT_OK


def cmd_eval(args, extra) -> int:
    _reject_extra(extra, "eval")
    cfg = _eval_config(args)
    d = load_dataset(args.dataset)
    report = evaluate(cfg, d)
    try:
        write_report(report, args.out, figures=args.figures == "on")
    except OSError as exc:
        raise DataError(f"cannot write report to {args.out}: {exc.strerror or exc}") from exc
    s = report.summary()
    first, second = ("macro_f1_smoothed", "macro_f1") if args.smoothing == "on" else ("macro_f1", "macro_f1_smoothed")
    for f in s["folds"]:
        status = f"error: {f['error']}" if f["error"] else f"{first} {f[first]:.4f}  {second} {f[second]:.4f}"
        print(f"{f['test_session']}\t{status}")
    print(f"mean_{first}\t{s['mean_' + first]}")
    print(f"mean_{second}\t{s['mean_' + second]}")
    print(f"report written to {args.out}")
    return EXIT_OK if s["n_failed"] == 0 else EXIT_DATA


def load_pipeline_dir(models: Path) -> GateModels:
    if not models.is_dir():
        raise ModelError(f"model directory {models} does not exist")
    inertial = load_model(models / INERTIAL_FILE)
    capacitive = load_model(models / CAPACITIVE_FILE)
    return GateModels(Classifier(*inertial), Classifier(*capacitive))


def saved_settings(models: Path) -> dict:
    """Window geometry and threshold recorded by ``train``; empty if absent."""
    path = models / PIPELINE_FILE
    return read_kv(path) if path.is_file() else {}


def cmd_stream(args, extra) -> int:
    _reject_extra(extra, "stream")
    models = load_pipeline_dir(args.models)
    if args.threshold is None:
        raise ConfigError("no movement threshold: pass --threshold or use a model directory with pipeline.cfg")
    detector = MovementDetectorConfig(threshold=args.threshold, span=args.span)
    pipeline = FusionPipeline(models, detector, _power_model(args), args.window_len, args.step)
    session = read_session_csv(args.input)

    out = sys.stdout
    if args.smoothing == "on":
        voter = StreamingMajority(args.k)
        pending: deque = deque()

        def emit(ev):
            pending.append(ev)
            label = voter.push(ev.label)
            if label is not None:
                out.write(smoothed_line(pending.popleft(), label) + "\n")
    else:
        voter = None

        def emit(ev):
            out.write(ev.to_line() + "\n")

    latencies = replay(pipeline, session.t, session.accel, session.cap, paced=args.paced, on_event=emit)
    if voter is not None:
        for label in voter.flush():
            out.write(smoothed_line(pending.popleft(), label) + "\n")
    out.flush()

    if latencies:
        ms = np.array(latencies) * 1e3
        budget = 1e3 * args.step / 50.0
        print(
            f"{len(ms)} window steps: compute latency mean {ms.mean():.2f} ms, max {ms.max():.2f} ms "
            f"(budget {budget:.0f} ms){'' if ms.max() < budget else ' OVERRUN'}",
            file=sys.stderr,
        )
        if args.latency:
            args.latency.write_text("".join(f"{v:.4f}\n" for v in ms))
    return EXIT_OK


def cmd_events(args, extra) -> int:
    _reject_extra(extra, "events")
    if args.input:
        try:
            lines = args.input.read_text().splitlines()
        except OSError as exc:
            raise DataError(f"cannot read {args.input}: {exc.strerror or exc}") from exc
    else:
        lines = sys.stdin.read().splitlines()
    _, labels = read_label_column(lines)
    if args.smoothing == "on":
        labels = smooth(labels, args.max_gap, args.k)
    for ev in events_from_labels(labels):
        print(ev.to_line())
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "eval": cmd_eval,
    "stream": cmd_stream,
    "events": cmd_events,
}


def main(argv=None) -> int:
    parser = build_parser()
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.WARNING - 10 * min(args.verbose, 2),
            format="%(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
        )
        fallback = saved_settings(args.models) if args.command == "stream" else None
        args, extra = resolve(args, subparsers, fallback)
        return COMMANDS[args.command](args, extra)
    except BrokenPipeError:
        # downstream closed early (e.g. piped into head); not an error
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (DataError, GestureGateError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
