"""Hysteresis event detection and context windows."""

import numpy as np
import pytest

from canreveal.errors import ConfigError
from canreveal.events import (
    DetectorConfig, EventDetector, VehicleEvent, default_detector_config,
    detect, window,
)
from canreveal.imu import ACCELERATOR, BRAKE, ReferenceSeries


def _series(values, dt=0.1, control=ACCELERATOR):
    ref = ReferenceSeries(control)
    for i, v in enumerate(values):
        ref.append(i * dt, v)
    return ref


def _pulse(level, on_s, off_s, total_s, dt=0.1):
    values = []
    t = 0.0
    n = int(total_s / dt)
    for i in range(n):
        t = i * dt
        values.append(level if on_s <= t < off_s else 0.0)
    return _series(values, dt)


CFG = DetectorConfig(on_threshold=1.0, off_threshold=0.5, min_duration=1.0,
                     pre_pad=2.0, post_pad=2.0, refractory=1.0)


def test_single_pulse_detected():
    ref = _pulse(2.0, 5.0, 8.0, 15.0)
    events = detect(ref, CFG)
    assert len(events) == 1
    ev = events[0]
    assert ev.t_on == pytest.approx(5.0, abs=0.11)
    assert ev.t_off == pytest.approx(8.0, abs=0.11)
    assert ev.peak == pytest.approx(2.0)


def test_short_excursion_rejected():
    ref = _pulse(2.0, 5.0, 5.3, 10.0)
    assert detect(ref, CFG) == []


def test_hysteresis_keeps_event_open():
    # oscillation between 0.7 and 1.2 stays above off=0.5: one long event
    values = [0.0] * 10
    for i in range(40):
        values.append(1.2 if i % 2 == 0 else 0.7)
    values += [0.0] * 10
    ref = _series(values)
    events = detect(ref, CFG)
    assert len(events) == 1
    assert events[0].duration == pytest.approx(4.0, abs=0.11)


def test_refractory_blocks_immediate_reopen():
    values = [0.0] * 5 + [2.0] * 15 + [0.0] * 3 + [2.0] * 15 + [0.0] * 5
    cfg = DetectorConfig(on_threshold=1.0, off_threshold=0.5, min_duration=1.0,
                         refractory=5.0)
    events = detect(_series(values), cfg)
    assert len(events) == 1
    cfg_fast = DetectorConfig(on_threshold=1.0, off_threshold=0.5, min_duration=1.0,
                              refractory=0.1)
    assert len(detect(_series(values), cfg_fast)) == 2


def test_absolute_mode_detects_both_directions():
    values = [0.0] * 10 + [-0.3] * 20 + [0.0] * 10 + [0.3] * 20 + [0.0] * 10
    cfg = DetectorConfig(on_threshold=0.15, off_threshold=0.06, min_duration=1.0,
                         absolute=True)
    events = detect(_series(values), cfg)
    assert len(events) == 2


def test_open_event_closed_at_stream_end():
    values = [0.0] * 10 + [2.0] * 30
    events = detect(_series(values), CFG)
    assert len(events) == 1
    assert events[0].t_off == pytest.approx(3.9)


def test_events_disjoint_ordered_min_duration():
    rng = np.random.default_rng(3)
    values = np.clip(np.cumsum(rng.normal(0, 0.3, 3000)) * 0.05, -4, 4)
    ref = _series(values.tolist(), dt=0.05)
    events = detect(ref, CFG)
    for ev in events:
        assert ev.duration >= CFG.min_duration
    for a, b in zip(events, events[1:]):
        assert a.t_off <= b.t_on


def test_raising_threshold_never_adds_events():
    rng = np.random.default_rng(11)
    values = np.abs(np.cumsum(rng.normal(0, 0.4, 2000)) * 0.05)
    ref = _series(values.tolist(), dt=0.05)
    counts = []
    for on in (0.8, 1.0, 1.5, 2.0, 3.0):
        cfg = DetectorConfig(on_threshold=on, off_threshold=0.4, min_duration=0.5)
        counts.append(len(detect(ref, cfg)))
    assert counts == sorted(counts, reverse=True)


def test_accel_and_decel_never_overlap():
    rng = np.random.default_rng(5)
    values = np.cumsum(rng.normal(0, 0.5, 4000)) * 0.05
    acc = _series(values.tolist(), dt=0.05, control=ACCELERATOR)
    dec = _series((-values).tolist(), dt=0.05, control=BRAKE)
    acc_events = detect(acc, CFG)
    dec_events = detect(dec, CFG)
    for a in acc_events:
        for d in dec_events:
            assert a.t_off <= d.t_on or d.t_off <= a.t_on


def test_window_padding_and_clamping():
    ev = VehicleEvent(kind="acceleration", t_on=5.0, t_off=8.0, peak=2.0)
    w = window(ev, CFG)
    assert (w.w_start, w.w_end) == (3.0, 10.0)
    clamped = window(VehicleEvent("acceleration", 1.0, 3.0, 2.0), CFG, rec_start=0.0)
    assert clamped.w_start == 0.0
    nopad = DetectorConfig(on_threshold=1.0, off_threshold=0.5, min_duration=1.0,
                           pre_pad=0.0, post_pad=0.0)
    w0 = window(ev, nopad)
    assert (w0.w_start, w0.w_end) == (ev.t_on, ev.t_off)


def test_config_validation():
    with pytest.raises(ConfigError):
        DetectorConfig(on_threshold=0.5, off_threshold=0.5)
    with pytest.raises(ConfigError):
        DetectorConfig(on_threshold=1.0, off_threshold=0.5, min_duration=0.0)


def test_default_configs_per_control():
    assert default_detector_config("steering").absolute
    assert not default_detector_config(ACCELERATOR).absolute


def test_empty_input_empty_output():
    assert detect(ReferenceSeries(ACCELERATOR), CFG) == []
