"""Topic bus fan-out, merged replay ordering, and pacing."""

import threading
import time

import pytest

from canreveal.bus import (
    ControlMessage, END_OF_STREAM, MessageBus, ReplayStats, replay_merged,
)
from canreveal.canbus import CanFrame
from canreveal.errors import ConfigError, ParseError
from canreveal.imu import ImuSample


@pytest.fixture
def logs(tmp_path):
    can = tmp_path / "can.log"
    imu = tmp_path / "imu.csv"
    can.write_text("(1.0) can0 0BE#1122\n(3.0) can0 0BE#3344\n")
    imu.write_text("t,ax,ay,az,gx,gy,gz\n"
                   "1.5,0,0,9.8,0,0,0\n"
                   "3.0,0,0,9.8,0,0,0\n")
    return str(can), str(imu)


def test_merge_order_and_tie_break(logs):
    msgs = list(replay_merged(*logs))
    kinds = [(m.topic, m.t) for m in msgs]
    # can at 3.0 precedes imu at 3.0: topic name ascending on ties
    assert kinds == [("can", 1.0), ("imu", 1.5), ("can", 3.0), ("imu", 3.0),
                     ("control", 3.0)]
    assert isinstance(msgs[0].payload, CanFrame)
    assert isinstance(msgs[1].payload, ImuSample)
    assert msgs[-1].payload == ControlMessage(END_OF_STREAM)


def test_merge_keys_non_decreasing(logs):
    msgs = list(replay_merged(*logs))[:-1]
    keys = [(m.t, m.topic, m.seq) for m in msgs]
    assert keys == sorted(keys)


def test_seq_strictly_increases_per_topic(logs):
    msgs = list(replay_merged(*logs))
    for topic in ("can", "imu"):
        seqs = [m.seq for m in msgs if m.topic == topic]
        assert seqs == list(range(1, len(seqs) + 1))


def test_replay_stats_and_lenient_mode(tmp_path):
    can = tmp_path / "can.log"
    imu = tmp_path / "imu.csv"
    can.write_text("(1.0) can0 0BE#1122\nnot a record\n(2.0) can0 0BE#3344\n")
    imu.write_text("1.0,0,0,9.8,0,0,0\n")
    with pytest.raises(ParseError, match="line 2"):
        list(replay_merged(str(can), str(imu), strict=True))
    stats = ReplayStats()
    msgs = list(replay_merged(str(can), str(imu), strict=False, stats=stats))
    assert stats.can_records == 2
    assert stats.skipped_can == [2]
    assert len([m for m in msgs if m.topic == "can"]) == 2


def test_unreadable_file(tmp_path):
    with pytest.raises(OSError):
        list(replay_merged(str(tmp_path / "missing.log"), str(tmp_path / "missing.csv")))


def test_subscribe_receives_published(logs):
    bus = MessageBus()
    sub = bus.subscribe("can")
    bus.publish("can", 1.0, "frame")
    msg = sub.get(timeout=1.0)
    assert msg.payload == "frame"
    assert msg.seq == 1


def test_two_subscribers_get_identical_sequences():
    bus = MessageBus()
    a = bus.subscribe("imu")
    b = bus.subscribe("imu")
    for i in range(5):
        bus.publish("imu", float(i), i)
    got_a = [a.get(timeout=1.0).payload for _ in range(5)]
    got_b = [b.get(timeout=1.0).payload for _ in range(5)]
    assert got_a == got_b == list(range(5))


def test_late_subscriber_misses_earlier_messages():
    bus = MessageBus()
    for i in range(5):
        bus.publish("can", float(i), i)
    sub = bus.subscribe("can")
    bus.publish("can", 5.0, "after")
    assert sub.get(timeout=1.0).payload == "after"
    assert sub.get(timeout=0.05) is None


def test_multi_topic_subscription_preserves_publication_order():
    bus = MessageBus()
    sub = bus.subscribe("can", "imu")
    order = ["can", "imu", "imu", "can"]
    for i, topic in enumerate(order):
        bus.publish(topic, float(i), i)
    got = [sub.get(timeout=1.0).topic for _ in range(4)]
    assert got == order


def test_concurrent_consumer_thread():
    bus = MessageBus()
    sub = bus.subscribe("can")
    seen = []

    def consume():
        for msg in sub:
            seen.append(msg.payload)

    thread = threading.Thread(target=consume)
    thread.start()
    for i in range(100):
        bus.publish("can", float(i), i)
    bus.unsubscribe(sub)
    thread.join(timeout=2.0)
    assert seen == list(range(100))


def test_empty_topic_rejected():
    bus = MessageBus()
    with pytest.raises(ConfigError):
        bus.subscribe("")
    with pytest.raises(ConfigError):
        bus.publish("", 0.0, None)


def test_unpaced_replay_is_deterministic(logs):
    first = [(m.topic, m.seq, m.t) for m in replay_merged(*logs)]
    second = [(m.topic, m.seq, m.t) for m in replay_merged(*logs)]
    assert first == second


def test_speed_zero_runs_fast(tmp_path):
    can = tmp_path / "can.log"
    imu = tmp_path / "imu.csv"
    can.write_text("".join(f"({i}.000000) can0 0BE#11\n" for i in range(100)))
    imu.write_text("0.5,0,0,9.8,0,0,0\n")
    t0 = time.monotonic()
    msgs = list(replay_merged(str(can), str(imu), speed=0.0))
    assert time.monotonic() - t0 < 1.0  # 99 source-seconds, no sleeping
    assert len(msgs) == 102


def test_paced_replay_meets_bound(tmp_path):
    # 2 s source span at speed 4.0: every delivery within 50 ms + 2% of source
    can = tmp_path / "can.log"
    imu = tmp_path / "imu.csv"
    can.write_text("".join(f"({i * 0.1:.6f}) can0 0BE#11\n" for i in range(21)))
    imu.write_text("0.05,0,0,9.8,0,0,0\n")
    speed = 4.0
    t0 = time.monotonic()
    src0 = None
    for msg in replay_merged(str(can), str(imu), speed=speed):
        if msg.topic == "control":
            continue
        if src0 is None:
            src0 = msg.t
        wall = time.monotonic() - t0
        src = msg.t - src0
        assert abs(wall - src / speed) <= 0.05 + 0.02 * src
