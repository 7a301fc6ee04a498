"""Resampling, Pearson scoring against a brute-force oracle, masking, ranking."""

import math

import numpy as np
import pytest

from canreveal.canbus import CanFrame, ChannelKey, ChannelStore, MSB
from canreveal.correlate import (
    DERIVATIVE, VALUE, ChannelScore, Grid, Mask, liveliness_mask, pearson,
    rank, rate_of_change, resample_linear, score_channels,
)
from canreveal.errors import ConfigError, CoverageError, ZeroVarianceError
from canreveal.events import EventWindow, VehicleEvent
from canreveal.imu import ACCELERATOR, ReferenceSeries


def brute_force_pearson(x, y):
    """Two-pass mean/covariance oracle, independent of the numpy path."""
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(x, y))
    vx = sum((a - mx) ** 2 for a in x)
    vy = sum((b - my) ** 2 for b in y)
    return cov / math.sqrt(vx * vy)


def test_grid_points():
    g = Grid(0.0, 4.0, 1.0)
    assert g.points == 5
    assert list(g.times()) == [0.0, 1.0, 2.0, 3.0, 4.0]
    assert Grid(1.0, 1.4, 1.0).points == 1  # single-point grid


def test_resample_linearity():
    out = resample_linear(np.array([0.0, 4.0]), np.array([0.0, 8.0]), Grid(0, 4, 1))
    assert list(out) == [0.0, 2.0, 4.0, 6.0, 8.0]


def test_resample_single_point_grid_hits_sample():
    out = resample_linear(np.array([0.0, 1.0, 2.0]), np.array([5.0, 7.0, 9.0]),
                          Grid(1.0, 1.4, 1.0))
    assert list(out) == [7.0]


def test_resample_coverage_error():
    with pytest.raises(CoverageError):
        resample_linear(np.array([0.0, 4.0]), np.array([0.0, 8.0]), Grid(0, 10, 1))


def test_rate_of_change_examples():
    assert list(rate_of_change([0, 2, 4, 6, 8], 1.0)) == [2.0, 2.0, 2.0, 2.0]
    assert list(rate_of_change([3, 3, 3], 0.5)) == [0.0, 0.0]
    assert list(rate_of_change([0, 1], 0.5)) == [2.0]
    with pytest.raises(ValueError):
        rate_of_change([1.0], 1.0)


def test_pearson_exact_cases():
    x = [1.0, 2.0, 3.0, 5.0]
    assert pearson(x, x) == pytest.approx(1.0)
    assert pearson(x, [-v for v in x]) == pytest.approx(-1.0)
    # frozen from the closed-form sum formula: r = 3 / sqrt(2 * 14/3)
    assert pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(0.981980506, abs=1e-8)


def test_pearson_zero_variance():
    with pytest.raises(ZeroVarianceError):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(ZeroVarianceError):
        pearson([1, 2, 3], [7, 7, 7])


def test_pearson_matches_brute_force_oracle():
    rng = np.random.default_rng(123)
    for _ in range(300):
        n = int(rng.integers(2, 1000))
        x = rng.normal(0, rng.uniform(0.1, 100), n)
        y = rng.normal(0, rng.uniform(0.1, 100), n)
        if np.ptp(x) == 0 or np.ptp(y) == 0:
            continue
        assert pearson(x, y) == pytest.approx(brute_force_pearson(x.tolist(), y.tolist()),
                                              abs=1e-9)


def test_pearson_symmetry():
    rng = np.random.default_rng(9)
    for _ in range(50):
        x = rng.normal(0, 1, 64)
        y = rng.normal(0, 1, 64)
        assert abs(pearson(x, y) - pearson(y, x)) < 1e-12


def _store_with(channel_fn, ids=(7,), t_end=20.0, dt=0.05):
    store = ChannelStore()
    t = 0.0
    while t <= t_end:
        for msg_id in ids:
            value = int(max(0, min(65535, channel_fn(msg_id, t))))
            store.ingest(CanFrame(t=t, id=msg_id, extended=False, dlc=2,
                                  payload=bytes([value >> 8, value & 0xFF])))
        t = round(t + dt, 10)
    return store


def _ref_sine(t_end=20.0, dt=0.05):
    ref = ReferenceSeries(ACCELERATOR)
    t = 0.0
    while t <= t_end:
        ref.append(round(t, 10), math.sin(t))
        t = round(t + dt, 10)
    return ref


def _windows(*spans):
    return [EventWindow(VehicleEvent("acceleration", a + 1, b - 1, 1.0), a, b)
            for a, b in spans]


def test_score_channels_affine_channel_is_perfect():
    ref = _ref_sine()
    store = _store_with(lambda _id, t: 1000 + 500 * math.sin(t))
    scores = score_channels(store, ref, _windows((2, 8), (10, 16)), Mask.all())
    key = ChannelKey(7, MSB, 0)
    by_key = {s.key: s for s in scores}
    assert by_key[key].r == pytest.approx(1.0, abs=5e-3)
    assert by_key[key].n_events == 2


def test_score_channels_negated_channel():
    ref = _ref_sine()
    store = _store_with(lambda _id, t: 30000 - 20000 * math.sin(t))
    scores = score_channels(store, ref, _windows((2, 8)), Mask.all())
    top = rank(scores, 1)[0]
    assert top.key == ChannelKey(7, MSB, 0)
    assert top.r == pytest.approx(-1.0, abs=5e-3)


def test_score_channels_excludes_constant():
    ref = _ref_sine()
    store = _store_with(lambda _id, t: 7)
    diagnostics = {}
    scores = score_channels(store, ref, _windows((2, 8)), Mask.all(),
                            diagnostics=diagnostics)
    assert scores == []
    assert diagnostics["excluded_variance"] >= 1


def test_score_channels_mask_filters():
    ref = _ref_sine()
    store = _store_with(lambda msg_id, t: 1000 + 500 * math.sin(t), ids=(7, 8))
    only_8 = Mask([ChannelKey(8, MSB, 0), ChannelKey(8, "lsb", 0)])
    scores = score_channels(store, ref, _windows((2, 8)), only_8)
    assert {s.key.id for s in scores} == {8}


def test_score_single_window_equals_plain_pearson():
    ref = _ref_sine()
    store = _store_with(lambda _id, t: 2000 + 800 * math.sin(3 * t))
    windows = _windows((2, 9))
    scores = score_channels(store, ref, windows, Mask.all(), rate=20.0)
    key = ChannelKey(7, MSB, 0)
    got = next(s for s in scores if s.key == key)

    grid = Grid(2, 9, 20.0)
    ct, cv = store.covering(key, 2, 9)
    rt, rv = ref.covering(2, 9)
    expect = pearson(resample_linear(ct, cv, grid), resample_linear(rt, rv, grid))
    assert got.r == expect
    assert got.n_samples == grid.points


def test_duplication_invariance():
    ref = _ref_sine()
    store = _store_with(lambda _id, t: 1500 + 700 * math.sin(2 * t + 0.5))
    w1 = _windows((2, 8))
    w2 = _windows((2, 8), (2, 8))
    key = ChannelKey(7, MSB, 0)
    r1 = next(s for s in score_channels(store, ref, w1, Mask.all()) if s.key == key)
    r2 = next(s for s in score_channels(store, ref, w2, Mask.all()) if s.key == key)
    assert abs(r1.r - r2.r) < 1e-9
    assert r2.n_samples >= r1.n_samples


def test_derivative_mode_segments_do_not_straddle():
    ref = _ref_sine()
    store = _store_with(lambda _id, t: 1000 + 500 * math.sin(t))
    windows = _windows((2, 8), (10, 16))
    scores = score_channels(store, ref, windows, Mask.all(), mode=DERIVATIVE)
    key = ChannelKey(7, MSB, 0)
    got = next(s for s in scores if s.key == key)
    pts = Grid(2, 8, 20.0).points + Grid(10, 16, 20.0).points
    assert got.n_samples == pts - 2  # one difference lost per window
    assert got.r == pytest.approx(1.0, abs=0.05)


def test_affine_invariance_of_rank():
    ref = _ref_sine()
    rng = np.random.default_rng(4)

    def build(a, b):
        return _store_with(lambda _id, t: a * math.sin(t) + b)

    base = score_channels(build(500, 1000), ref, _windows((2, 8)), Mask.all())
    base_r = next(s for s in base if s.key == ChannelKey(7, MSB, 0)).r
    for _ in range(5):
        a = float(rng.uniform(100, 2000))
        b = float(rng.uniform(2000, 30000))
        scores = score_channels(build(a, b), ref, _windows((2, 8)), Mask.all())
        r = next(s for s in scores if s.key == ChannelKey(7, MSB, 0)).r
        assert abs(abs(r) - abs(base_r)) < 2e-2  # quantization-level wiggle only
    neg = score_channels(build(-500, 31000), ref, _windows((2, 8)), Mask.all())
    r_neg = next(s for s in neg if s.key == ChannelKey(7, MSB, 0)).r
    assert r_neg == pytest.approx(-base_r, abs=2e-2)


def test_rank_order_and_tie_break():
    def score(id, r):
        return ChannelScore(ChannelKey(id, MSB, 0), r, 100, 1)

    a, b, c = score(100, 0.5), score(50, -0.8), score(200, 0.5)
    ranked = rank([a, b, c], 9)
    assert [s.key.id for s in ranked] == [50, 100, 200]  # |r| desc, then name
    assert rank([], 5) == []
    assert len(rank([a, b, c], 1)) == 1
    with pytest.raises(ConfigError):
        rank([a], 0)


def test_liveliness_mask():
    store = ChannelStore()
    counter = 0
    rng = np.random.default_rng(2)
    for i in range(400):
        t = i * 0.05
        store.ingest(CanFrame(t=t, id=1, extended=False, dlc=2, payload=b"\x00\x07"))
        store.ingest(CanFrame(t=t, id=2, extended=False, dlc=2,
                              payload=bytes([counter >> 8, counter & 0xFF])))
        counter = (counter + 1) % 65536
        noisy = int(rng.integers(0, 65536))
        store.ingest(CanFrame(t=t, id=3, extended=False, dlc=2,
                              payload=bytes([noisy >> 8, noisy & 0xFF])))
    mask = liveliness_mask(store, horizon=600.0)
    assert ChannelKey(1, MSB, 0) not in mask          # constant
    assert ChannelKey(2, MSB, 0) not in mask          # counter
    assert ChannelKey(3, MSB, 0) in mask              # noisy
    mask_no_counter_filter = liveliness_mask(store, horizon=600.0,
                                             exclude_counters=False)
    assert ChannelKey(2, MSB, 0) in mask_no_counter_filter


def test_counter_deltas_are_uniform():
    # oracle check for the >= 99% single-delta rule on a wrapping counter
    values = [(i % 65536) for i in range(20000)]
    deltas = np.diff(values)
    frac = np.mean(deltas == 1)
    assert frac >= 0.99


def test_score_channels_coverage_diagnostics():
    # channel that starts transmitting after the first window: excluded, counted
    ref = _ref_sine()
    store = ChannelStore()
    t = 6.0
    while t <= 20.0:
        value = int(1000 + 500 * math.sin(t))
        store.ingest(CanFrame(t=t, id=7, extended=False, dlc=2,
                              payload=bytes([value >> 8, value & 0xFF])))
        t = round(t + 0.05, 10)
    diagnostics = {}
    scores = score_channels(store, ref, _windows((2, 8)), Mask.all(),
                            diagnostics=diagnostics)
    assert scores == []
    assert diagnostics["excluded_coverage"] == 2  # msb_0 and lsb_0
