import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gesturegate.errors import ConfigError, DataError
from gesturegate.fusion import (
    Classifier,
    FusionPipeline,
    GateModels,
    GateState,
    PowerModel,
    RecognitionEvent,
    Stage,
    gate_step,
    gating_savings,
    read_label_column,
    replay,
    session_energy,
    smoothed_line,
)
from gesturegate.nn.builders import build_capacitive_model, build_inertial_model
from gesturegate.nn.model import init_weights
from gesturegate.stream import ChannelSet, MovementDetectorConfig, Window

DETECTOR = MovementDetectorConfig(threshold=0.5)


class Fake:
    """Stand-in classifier returning a fixed (or scripted) distribution."""

    def __init__(self, probs):
        self.probs = probs
        self.calls = 0
        self.seen = []

    def predict_proba(self, x):
        self.calls += 1
        self.seen.append(x)
        p = self.probs(x) if callable(self.probs) else self.probs
        return np.asarray(p, dtype=float)


def onehot(k, n):
    p = np.full(n, 0.01 / (n - 1))
    p[k] = 0.99
    return p


def windows(start=0, accel=0.0, cap_seed=0):
    rng = np.random.default_rng(cap_seed)
    iw = Window(np.full((3, 100), accel), ChannelSet.INERTIAL3, start_index=start)
    cw = Window(rng.normal(1000, 50, (4, 100)), ChannelSet.CAPACITIVE4, start_index=start)
    return iw, cw


def test_stationary_window_is_idle_and_lazy():
    models = GateModels(Fake(onehot(1, 2)), Fake(onehot(5, 9)))
    state, ev = gate_step(GateState(), *windows(), models, DETECTOR)
    assert (ev.label, ev.stage_reached, ev.power_watts, ev.confidence) == (0, Stage.IDLE, 0.84, 1.0)
    assert models.inertial.calls == models.capacitive.calls == 0
    assert state.stage is Stage.IDLE


def test_inertial_null_stops_before_capacitive():
    models = GateModels(Fake([0.7, 0.3]), Fake(onehot(5, 9)))
    _, ev = gate_step(GateState(), *windows(accel=1.0), models, DETECTOR)
    assert (ev.label, ev.stage_reached, ev.power_watts) == (0, Stage.INERTIAL, 0.94)
    assert ev.confidence == pytest.approx(0.7)
    assert (models.inertial.calls, models.capacitive.calls) == (1, 0)


def test_full_path_reports_capacitive_class():
    models = GateModels(Fake(onehot(1, 2)), Fake(onehot(5, 9)))
    state, ev = gate_step(GateState(), *windows(start=75, accel=1.0), models, DETECTOR)
    assert (ev.window_start_index, ev.label, ev.stage_reached, ev.power_watts) == (75, 5, Stage.CAPACITIVE, 1.15)
    assert ev.confidence == pytest.approx(0.99)
    assert state == GateState(Stage.CAPACITIVE, 5, 75)


def test_models_see_normalized_windows_and_gate_sees_raw_tail():
    models = GateModels(Fake(onehot(1, 2)), Fake(onehot(2, 9)))
    iw, cw = windows(accel=0.0)
    iw.data[:, -6:] = 0.1  # score 1.8 > 0.5, only in the trailing span
    gate_step(GateState(), iw, cw, models, DETECTOR)
    for x in models.inertial.seen + models.capacitive.seen:
        assert x.min() >= 0 and x.max() <= 1
    iw.data[:, -6:] = 0.0
    iw.data[:, :94] = 5.0  # large motion outside the trailing span is ignored
    _, ev = gate_step(GateState(), iw, cw, models, DETECTOR)
    assert ev.stage_reached is Stage.IDLE


def test_gate_step_input_errors():
    models = GateModels(Fake(onehot(1, 2)), Fake(onehot(2, 9)))
    iw, cw = windows(start=0)
    _, cw_late = windows(start=25)
    with pytest.raises(DataError):
        gate_step(GateState(), iw, cw_late, models, DETECTOR)
    with pytest.raises(DataError):
        gate_step(GateState(), cw, iw, models, DETECTOR)
    iw.normalized = True
    with pytest.raises(DataError):
        gate_step(GateState(), iw, cw, models, DETECTOR)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.booleans(), st.integers(0, 8)), min_size=1, max_size=30))
def test_laziness_counts_match_stages(script):
    """Invocation counts equal the stage tallies for any scripted stream."""
    it = iter(script)
    current = {}

    def inertial(_):
        return onehot(int(current["gesture"]), 2)

    models = GateModels(Fake(inertial), Fake(lambda _: onehot(current["label"], 9)))
    events = []
    state = GateState()
    for i, (moving, gesture, label) in enumerate(it):
        current.update(gesture=gesture, label=label)
        state, ev = gate_step(state, *windows(start=25 * i, accel=1.0 if moving else 0.0), models, DETECTOR)
        events.append(ev)
    stages = [e.stage_reached for e in events]
    assert models.capacitive.calls == stages.count(Stage.CAPACITIVE)
    assert models.inertial.calls == stages.count(Stage.CAPACITIVE) + stages.count(Stage.INERTIAL)
    assert all(e.label == 0 for e in events if e.stage_reached < Stage.CAPACITIVE)
    avg = sum(e.power_watts for e in events) / len(events)
    assert 0.84 - 1e-12 <= avg <= 1.15 + 1e-12


def test_session_energy_examples():
    assert session_energy([(10.0, Stage.IDLE)]) == pytest.approx((8.4, 0.84))
    assert session_energy([(5.0, Stage.IDLE), (5.0, Stage.CAPACITIVE)]) == pytest.approx((9.95, 0.995))
    with pytest.raises(DataError):
        session_energy([(0.0, Stage.IDLE)])
    with pytest.raises(DataError):
        session_energy([(-1.0, Stage.IDLE)])


def _events(stages):
    p = PowerModel()
    return [RecognitionEvent(25 * i, 0, 1.0, s, p.watts(s)) for i, s in enumerate(stages)]


def test_gating_savings_examples():
    assert gating_savings(_events([Stage.IDLE] * 10)) == pytest.approx(0.2696, abs=5e-5)
    assert gating_savings(_events([Stage.IDLE] * 10)) == pytest.approx((1.15 - 0.84) / 1.15)
    assert gating_savings(_events([Stage.CAPACITIVE] * 4)) == 0.0
    assert gating_savings(_events([Stage.IDLE, Stage.CAPACITIVE] * 5)) == pytest.approx(0.1348, abs=5e-5)
    with pytest.raises(DataError):
        gating_savings([])


def test_mixed_session_closed_form():
    stages = [Stage.IDLE] * 50 + [Stage.INERTIAL] * 25 + [Stage.CAPACITIVE] * 25
    want = 0.5 * 0.84 + 0.25 * 0.94 + 0.25 * 1.15
    _, avg = session_energy([(0.5, s) for s in stages])
    assert avg == pytest.approx(want, rel=1e-12)
    assert gating_savings(_events(stages)) == pytest.approx(1 - want / 1.15, rel=1e-12)


def test_power_model_validation():
    with pytest.raises(ConfigError):
        PowerModel(1.0, 0.9, 1.2)
    with pytest.raises(ConfigError):
        PowerModel(0.0, 0.9, 1.2)
    assert PowerModel(1, 1, 1).watts(Stage.INERTIAL) == 1


def test_event_line_round_trip():
    ev = RecognitionEvent(125, 7, 0.875, Stage.CAPACITIVE, 1.15)
    line = ev.to_line()
    assert line == "125\t7\t0.875000\tCapacitiveActive\t1.15"
    assert RecognitionEvent.from_line(line) == ev
    with pytest.raises(DataError):
        RecognitionEvent.from_line("1\t2\t3")


def test_event_invariants():
    with pytest.raises(DataError):
        RecognitionEvent(0, 3, 0.5, Stage.INERTIAL, 0.94)
    with pytest.raises(DataError):
        RecognitionEvent(0, 9, 0.5, Stage.CAPACITIVE, 1.15)
    with pytest.raises(DataError):
        RecognitionEvent(0, 0, 1.5, Stage.IDLE, 0.84)


def test_label_column_reader():
    ev = RecognitionEvent(50, 0, 0.6, Stage.INERTIAL, 0.94)
    starts, labels = read_label_column([ev.to_line(), "", smoothed_line(ev, 4)])
    assert (starts, labels) == ([50, 50], [0, 4])
    with pytest.raises(DataError, match="line 1"):
        read_label_column(["x\ty"])
    with pytest.raises(DataError, match="label 12"):
        read_label_column(["0\t12\t1\tIdle\t0.84"])


def _real_pipeline():
    i, c = build_inertial_model(), build_capacitive_model()
    models = GateModels(Classifier(i, init_weights(i, 1)), Classifier(c, init_weights(c, 2)))
    return FusionPipeline(models, MovementDetectorConfig(0.5))


def _stream(n=400, seed=0):
    rng = np.random.default_rng(seed)
    accel = rng.normal(0, 0.3, (n, 3))
    accel[:150] = 0.0
    cap = rng.normal(1e5, 100, (n, 4))
    t = np.arange(n) / 50.0
    return t, accel, cap


def test_pipeline_determinism_and_laziness():
    t, accel, cap = _stream()
    p1, p2 = _real_pipeline(), _real_pipeline()
    e1 = p1.run_arrays(accel, cap, t)
    e2 = p2.run_arrays(accel, cap, t)
    assert [e.to_line() for e in e1] == [e.to_line() for e in e2]
    assert len(e1) == (400 - 100) // 25 + 1
    stages = [e.stage_reached for e in e1]
    assert stages[:3] == [Stage.IDLE] * 3  # windows ending inside the still lead-in
    models = p1.models
    assert models.capacitive.calls == stages.count(Stage.CAPACITIVE)
    assert models.inertial.calls == len(stages) - stages.count(Stage.IDLE)


def test_pipeline_rejects_span_longer_than_window():
    with pytest.raises(ConfigError):
        FusionPipeline(GateModels(Fake([1, 0]), Fake(onehot(0, 9))), MovementDetectorConfig(1.0, span=200), window_len=100)


def test_replay_paces_by_timestamps():
    t, accel, cap = _stream(n=150)
    now = [0.0]
    slept = []

    def clock():
        return now[0]

    def sleep(s):
        slept.append(s)
        now[0] += s

    lat = replay(_real_pipeline(), t, accel, cap, paced=True, clock=clock, sleep=sleep)
    assert len(lat) == 3
    assert math.isclose(sum(slept), t[-1], rel_tol=1e-9)
    seen = []
    lat = replay(_real_pipeline(), t, accel, cap, on_event=seen.append)
    assert len(seen) == len(lat) == 3 and all(v >= 0 for v in lat)
