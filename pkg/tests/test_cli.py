import numpy as np
import pytest

from gesturegate.cli import EXIT_CONFIG, EXIT_DATA, EXIT_MODEL, main
from gesturegate.evaluation.dataset import LabeledSession, write_session_csv
from gesturegate.fusion import RecognitionEvent, Stage


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "synth.cfg"
    cfg.write_text("# small sessions\ntries_per_gesture = 1\n")
    assert main(["generate", "--out", str(root / "ds"), "--sessions", "3", "--seed", "4", "--config", str(cfg)]) == 0
    assert main(["train", "--dataset", str(root / "ds"), "--out", str(root / "models"), "--max-epochs", "2"]) == 0
    return root


def test_generate_is_deterministic(work, tmp_path):
    cfg = work / "synth.cfg"
    assert main(["generate", "--out", str(tmp_path), "--sessions", "3", "--seed", "4", "--config", str(cfg)]) == 0
    for name in ("session_00.csv", "session_02.csv", "synth.cfg"):
        assert (tmp_path / name).read_bytes() == (work / "ds" / name).read_bytes()


def test_train_writes_model_directory(work):
    names = {p.name for p in (work / "models").iterdir()}
    assert names == {"inertial.ggnn", "capacitive.ggnn", "pipeline.cfg", "history.json"}
    assert "threshold" in (work / "models" / "pipeline.cfg").read_text()


def test_single_session_eval_explains(tmp_path, capsys):
    assert main(["generate", "--out", str(tmp_path / "one"), "--sessions", "1", "--config", str(tmp_path / "x.cfg")]) == EXIT_CONFIG
    (tmp_path / "x.cfg").write_text("tries_per_gesture = 1\n")
    assert main(["generate", "--out", str(tmp_path / "one"), "--sessions", "1", "--config", str(tmp_path / "x.cfg")]) == 0
    code = main(["eval", "--dataset", str(tmp_path / "one"), "--out", str(tmp_path / "r")])
    assert code == EXIT_DATA
    assert "at least 2 sessions" in capsys.readouterr().err


def test_exit_codes(work, tmp_path, capsys):
    assert main(["eval", "--dataset", str(tmp_path / "missing"), "--out", str(tmp_path / "r")]) == EXIT_DATA
    assert main(["stream", "--models", str(tmp_path / "none"), "--input", "x.csv"]) == EXIT_MODEL
    assert main(["eval", "--dataset", "d", "--out", "o", "--smoothing", "maybe"]) == EXIT_CONFIG
    assert main(["bogus"]) == EXIT_CONFIG
    bad = tmp_path / "bad.cfg"
    bad.write_text("no_such_key = 3\n")
    assert main(["train", "--dataset", str(work / "ds"), "--out", str(tmp_path / "m"), "--config", str(bad)]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "no_such_key" in err


def test_corrupt_model_is_model_error(work, tmp_path, capsys):
    models = tmp_path / "models"
    models.mkdir()
    for p in (work / "models").iterdir():
        (models / p.name).write_bytes(p.read_bytes())
    data = bytearray((models / "capacitive.ggnn").read_bytes())
    data[100] ^= 0xFF
    (models / "capacitive.ggnn").write_bytes(bytes(data))
    assert main(["stream", "--models", str(models), "--input", str(work / "ds" / "session_00.csv")]) == EXIT_MODEL
    assert "checksum" in capsys.readouterr().err


def _still_session(path, n=600):
    t = np.arange(n) / 50.0
    s = LabeledSession("still", t, np.zeros((n, 3)), np.full((n, 4), 150000.0), np.zeros(n, dtype=int))
    write_session_csv(s, path)


def test_stream_on_still_session_stays_idle(work, tmp_path, capsys):
    _still_session(tmp_path / "still.csv")
    lat = tmp_path / "lat.txt"
    code = main(["stream", "--models", str(work / "models"), "--input", str(tmp_path / "still.csv"), "--latency", str(lat)])
    assert code == 0
    out = capsys.readouterr()
    events = [RecognitionEvent.from_line(line) for line in out.out.splitlines()]
    assert len(events) == (600 - 100) // 25 + 1
    assert all(e.stage_reached is Stage.IDLE and e.label == 0 for e in events)
    assert len(lat.read_text().split()) == len(events)
    assert "budget 500 ms" in out.err


def test_stream_flag_overrides_saved_threshold(work, capsys):
    inp = str(work / "ds" / "session_01.csv")
    assert main(["stream", "--models", str(work / "models"), "--input", inp, "--threshold", "1e9"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert {line.split("\t")[3] for line in lines} == {"Idle"}


def test_stream_smoothing_keeps_one_line_per_window(work, capsys):
    inp = str(work / "ds" / "session_01.csv")
    assert main(["stream", "--models", str(work / "models"), "--input", inp]) == 0
    raw = capsys.readouterr().out.splitlines()
    assert main(["stream", "--models", str(work / "models"), "--input", inp, "--smoothing", "on"]) == 0
    smoothed = capsys.readouterr().out.splitlines()
    assert len(raw) == len(smoothed)
    assert [l.split("\t")[0] for l in raw] == [l.split("\t")[0] for l in smoothed]


def test_events_subcommand(tmp_path, capsys):
    labels = [0, 0, 3, 3, 5, 3, 3, 0]
    stage = lambda l: Stage.CAPACITIVE if l else Stage.IDLE  # noqa: E731
    lines = [RecognitionEvent(25 * i, l, 1.0, stage(l), 1.15 if l else 0.84).to_line() for i, l in enumerate(labels)]
    (tmp_path / "ev.txt").write_text("\n".join(lines) + "\n")
    assert main(["events", "--input", str(tmp_path / "ev.txt")]) == 0
    assert capsys.readouterr().out.splitlines() == ["0,0,2", "3,2,4", "5,4,5", "3,5,7", "0,7,8"]
    assert main(["events", "--input", str(tmp_path / "ev.txt"), "--smoothing", "on", "--k", "1"]) == 0
    assert capsys.readouterr().out.splitlines() == ["0,0,2", "3,2,7", "0,7,8"]


def test_config_file_precedence(work, tmp_path, capsys):
    cfg = tmp_path / "eval.cfg"
    cfg.write_text("max_epochs = 1\nfigures = off\nsmoothing = on\n")
    out = tmp_path / "rep"
    assert main(["eval", "--dataset", str(work / "ds"), "--out", str(out), "--config", str(cfg), "--smoothing", "off"]) == 0
    printed = capsys.readouterr().out
    assert "mean_macro_f1\t" in printed.splitlines()[-3]  # flag beat the file
    assert not (out / "figures").exists()  # file beat the default
    assert '"max_epochs": 1' in (out / "summary.json").read_text()
