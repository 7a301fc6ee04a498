"""Discovery cadence, convergence, displacement, and the not-identified path."""

import math

import pytest

from canreveal.canbus import CanFrame, ChannelKey, ChannelStore, MSB
from canreveal.correlate import ChannelScore, Mask
from canreveal.discovery import (
    CANDIDATE, COLLECTING, CONVERGED, NOT_IDENTIFIED, Discovery,
    DiscoveryConfig, RankingReport, displacement_log, update_status,
)
from canreveal.errors import ConfigError
from canreveal.events import EventWindow, VehicleEvent
from canreveal.imu import ACCELERATOR, ReferenceSeries


def _report(idx, tops):
    """tops: list of (id, r) entries, already ordered."""
    entries = tuple(ChannelScore(ChannelKey(i, MSB, 0), r, 100, idx * 3)
                    for i, r in tops)
    return RankingReport(round_index=idx, events_seen=idx * 3,
                         elapsed_s=idx * 30.0, entries=entries)


CFG = DiscoveryConfig()


def test_update_status_examples():
    rounds = [_report(1, [(10, 0.7)]), _report(2, [(10, 0.8)])]
    status, winner = update_status(rounds, CFG, budget_exhausted=False)
    assert status == CONVERGED
    assert winner == ChannelKey(10, MSB, 0)

    displaced = [_report(1, [(10, 0.7)]), _report(2, [(20, 0.8)])]
    status, winner = update_status(displaced, CFG, budget_exhausted=False)
    assert status == CANDIDATE
    assert winner is None

    weak = [_report(1, [(10, 0.3)]), _report(2, [(10, 0.35)])]
    assert update_status(weak, CFG, budget_exhausted=True)[0] == NOT_IDENTIFIED
    assert update_status(weak, CFG, budget_exhausted=False)[0] == COLLECTING


def test_update_status_needs_r_min_in_every_stability_round():
    rounds = [_report(1, [(10, 0.3)]), _report(2, [(10, 0.8)])]
    status, _ = update_status(rounds, CFG, budget_exhausted=False)
    assert status == CANDIDATE


def test_converged_on_budget_boundary_wins_over_not_identified():
    rounds = [_report(1, [(10, 0.7)]), _report(2, [(10, 0.8)])]
    status, winner = update_status(rounds, CFG, budget_exhausted=True)
    assert status == CONVERGED


def test_displacement_log():
    a, b = ChannelKey(1, MSB, 0), ChannelKey(2, MSB, 0)
    rounds = [_report(1, [(1, 0.5)]), _report(2, [(1, 0.6)]), _report(3, [(2, 0.7)])]
    assert displacement_log(rounds) == [(3, a, b)]
    stable = [_report(i, [(1, 0.5)]) for i in (1, 2, 3)]
    assert displacement_log(stable) == []
    swap = [_report(1, [(1, 0.5)]), _report(2, [(2, 0.6)]), _report(3, [(1, 0.7)])]
    assert displacement_log(swap) == [(2, a, b), (3, b, a)]


def _window(a, b):
    return EventWindow(VehicleEvent("acceleration", a + 1, b - 1, 2.0), a, b)


def _fixture(correlated=True, t_end=200.0):
    """Store with one correlated channel and one flat-noise channel, plus ref."""
    store = ChannelStore()
    ref = ReferenceSeries(ACCELERATOR)
    t = 0.0
    while t <= t_end:
        signal = math.sin(t / 3.0)
        ref.append(round(t, 10), signal)
        value = int(30000 + 10000 * signal) if correlated else 17
        store.ingest(CanFrame(t=t, id=42, extended=False, dlc=2,
                              payload=bytes([value >> 8, value & 0xFF])))
        t = round(t + 0.05, 10)
    return store, ref


def test_rounds_fire_every_cadence():
    store, ref = _fixture()
    disc = Discovery(ACCELERATOR, DiscoveryConfig())
    reports = []
    for i in range(15):
        a = 5.0 + i * 12.0
        rep = disc.on_event(_window(a, a + 8.0), store, ref, Mask.all(),
                            elapsed_s=a + 8.0)
        if rep is not None:
            reports.append(rep)
    assert [r.events_seen for r in reports] == [3, 6, 9, 12, 15]
    assert [r.round_index for r in reports] == [1, 2, 3, 4, 5]
    assert len(disc.state.rounds) == 5
    assert disc.state.status == CONVERGED
    assert disc.state.winner == ChannelKey(42, MSB, 0)


def test_round_count_law():
    store, ref = _fixture()
    disc = Discovery(ACCELERATOR, DiscoveryConfig(max_events=30))
    for i in range(14):
        a = 5.0 + i * 12.0
        disc.on_event(_window(a, a + 8.0), store, ref, Mask.all(), elapsed_s=a)
        assert len(disc.state.rounds) == disc.state.events_seen // 3


def test_budget_exhaustion_without_signal_is_not_identified():
    store, ref = _fixture(correlated=False)
    disc = Discovery(ACCELERATOR, DiscoveryConfig(max_events=9))
    for i in range(9):
        a = 5.0 + i * 12.0
        disc.on_event(_window(a, a + 8.0), store, ref, Mask.all(), elapsed_s=a)
    assert disc.state.status == NOT_IDENTIFIED
    assert disc.state.winner is None
    assert disc.state.winner_name == "N/A"
    # rounds exist but carry no entries (the only channel is constant)
    assert all(r.entries == () for r in disc.state.rounds)


def test_events_beyond_budget_ignored():
    store, ref = _fixture()
    disc = Discovery(ACCELERATOR, DiscoveryConfig(max_events=6))
    for i in range(10):
        a = 5.0 + i * 12.0
        disc.on_event(_window(a, a + 8.0), store, ref, Mask.all(), elapsed_s=a)
    assert disc.state.events_seen == 6
    assert len(disc.state.rounds) == 2


def test_finalize_before_convergence_is_not_identified():
    store, ref = _fixture()
    disc = Discovery(ACCELERATOR, DiscoveryConfig())
    a = 5.0
    disc.on_event(_window(a, a + 8.0), store, ref, Mask.all(), elapsed_s=a)
    disc.finalize()
    assert disc.state.status == NOT_IDENTIFIED


def test_finalize_after_convergence_keeps_winner():
    store, ref = _fixture()
    disc = Discovery(ACCELERATOR, DiscoveryConfig())
    for i in range(6):
        a = 5.0 + i * 12.0
        disc.on_event(_window(a, a + 8.0), store, ref, Mask.all(), elapsed_s=a)
    assert disc.state.status == CONVERGED
    disc.finalize()
    assert disc.state.status == CONVERGED
    assert disc.state.winner == ChannelKey(42, MSB, 0)


def test_deterministic_given_same_inputs():
    def run():
        store, ref = _fixture()
        disc = Discovery(ACCELERATOR, DiscoveryConfig())
        for i in range(15):
            a = 5.0 + i * 12.0
            disc.on_event(_window(a, a + 8.0), store, ref, Mask.all(), elapsed_s=a)
        return [(r.round_index, tuple((e.key, e.r) for e in r.entries))
                for r in disc.state.rounds]

    assert run() == run()


def test_status_transition_monotonicity():
    store, ref = _fixture()
    disc = Discovery(ACCELERATOR, DiscoveryConfig())
    seen = []
    for i in range(15):
        a = 5.0 + i * 12.0
        disc.on_event(_window(a, a + 8.0), store, ref, Mask.all(), elapsed_s=a)
        seen.append(disc.state.status)
    order = {COLLECTING: 0, CANDIDATE: 1, CONVERGED: 2}
    ranks = [order[s] for s in seen]
    assert ranks == sorted(ranks)


def test_config_validation():
    with pytest.raises(ConfigError):
        DiscoveryConfig(cadence=0)
    with pytest.raises(ConfigError):
        DiscoveryConfig(r_min=0.0)
    with pytest.raises(ConfigError):
        DiscoveryConfig(max_events=2, cadence=3)
