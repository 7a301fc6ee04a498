"""In-process topic bus and paced log replay.

The bus guarantees per-topic FIFO and, for replayed sources, global delivery
in merged timestamp order with ties broken by topic name then sequence
number. Messages are immutable after publication. speed=0 replays unpaced
for batch runs; speed>0 paces deliveries against the wall clock.
"""

from __future__ import annotations

import heapq
import queue
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator

from .errors import ConfigError
from .canbus import CanFrame, iter_candump
from .imu import ImuSample, iter_imu_log

TOPIC_CAN = "can"
TOPIC_IMU = "imu"
TOPIC_CONTROL = "control"

END_OF_STREAM = "end_of_stream"


@dataclass(frozen=True)
class ControlMessage:
    """Out-of-band pipeline signal, e.g. end of a replayed recording."""

    kind: str


@dataclass(frozen=True)
class BusMessage:
    topic: str
    seq: int
    t: float
    payload: Any


class Subscription:
    """Queue-backed handle receiving every message published after creation."""

    def __init__(self, topics: tuple[str, ...], maxsize: int = 0):
        self.topics = topics
        self._queue: queue.Queue = queue.Queue(maxsize=maxsize)
        self._closed = False

    def _push(self, msg: BusMessage) -> None:
        self._queue.put(msg)

    def get(self, timeout: float | None = None) -> BusMessage | None:
        """Next message, or None once the subscription is closed and drained."""
        if self._closed and self._queue.empty():
            return None
        try:
            item = self._queue.get(timeout=timeout)
        except queue.Empty:
            return None
        return item

    def close(self) -> None:
        self._closed = True
        self._queue.put(None)  # wake blocked readers

    def __iter__(self) -> Iterator[BusMessage]:
        while True:
            item = self._queue.get()
            if item is None:
                return
            yield item


class MessageBus:
    """Topic pub/sub with per-topic sequence numbers and fan-out delivery."""

    def __init__(self):
        self._lock = threading.Lock()
        self._seq: dict[str, int] = {}
        self._subs: list[Subscription] = []
        self._callbacks: list[tuple[tuple[str, ...], Callable[[BusMessage], None]]] = []

    def subscribe(self, *topics: str) -> Subscription:
        """Subscribe to one or more topics through a single ordered queue."""
        if not topics or any(not t for t in topics):
            raise ConfigError("topic names must be non-empty")
        sub = Subscription(topics)
        with self._lock:
            self._subs.append(sub)
        return sub

    def attach(self, callback: Callable[[BusMessage], None], *topics: str) -> None:
        """Register an in-line consumer invoked synchronously on publication."""
        if not topics or any(not t for t in topics):
            raise ConfigError("topic names must be non-empty")
        with self._lock:
            self._callbacks.append((topics, callback))

    def unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            if sub in self._subs:
                self._subs.remove(sub)
        sub.close()

    def publish(self, topic: str, t: float, payload: Any) -> BusMessage:
        if not topic:
            raise ConfigError("topic names must be non-empty")
        with self._lock:
            seq = self._seq.get(topic, 0) + 1
            self._seq[topic] = seq
            msg = BusMessage(topic=topic, seq=seq, t=t, payload=payload)
            subs = [s for s in self._subs if topic in s.topics]
            callbacks = [cb for topics, cb in self._callbacks if topic in topics]
        for sub in subs:
            sub._push(msg)
        for cb in callbacks:
            cb(msg)
        return msg


class ReplayClock:
    """Paces source timestamps against the wall clock at a speed factor."""

    def __init__(self, speed: float):
        if speed < 0:
            raise ConfigError("replay speed must be >= 0 (0 = unpaced)")
        self.speed = speed
        self.t_now: float | None = None
        self._src0: float | None = None
        self._wall0: float | None = None

    def wait_until(self, t: float) -> None:
        """Block until the wall clock reaches t's paced position; track t_now."""
        if self.t_now is not None:
            t = max(t, self.t_now)
        self.t_now = t
        if self.speed == 0:
            return
        if self._src0 is None:
            self._src0 = t
            self._wall0 = time.monotonic()
            return
        target = self._wall0 + (t - self._src0) / self.speed
        delay = target - time.monotonic()
        if delay > 0:
            time.sleep(delay)


@dataclass
class ReplayStats:
    can_records: int = 0
    imu_records: int = 0
    skipped_can: list[int] = field(default_factory=list)
    skipped_imu: list[int] = field(default_factory=list)


def replay_merged(can_log: str, imu_log: str, speed: float = 0.0,
                  strict: bool = True,
                  stats: ReplayStats | None = None) -> Iterator[BusMessage]:
    """Stream both logs as BusMessages in merged timestamp order.

    Ties are broken by topic name ascending ("can" before "imu"), then by
    per-topic sequence. A final control message marks the end of the streams.
    """
    if stats is None:
        stats = ReplayStats()
    clock = ReplayClock(speed)

    def can_source() -> Iterator[tuple[float, str, CanFrame]]:
        with open(can_log, "r", encoding="utf-8") as fp:
            for frame in iter_candump(fp, strict=strict, skipped=stats.skipped_can):
                stats.can_records += 1
                yield frame.t, TOPIC_CAN, frame

    def imu_source() -> Iterator[tuple[float, str, ImuSample]]:
        with open(imu_log, "r", encoding="utf-8") as fp:
            for sample in iter_imu_log(fp, strict=strict, skipped=stats.skipped_imu):
                stats.imu_records += 1
                yield sample.t, TOPIC_IMU, sample

    seqs = {TOPIC_CAN: 0, TOPIC_IMU: 0}
    merged = heapq.merge(can_source(), imu_source(), key=lambda rec: (rec[0], rec[1]))
    last_t = None
    for t, topic, payload in merged:
        clock.wait_until(t)
        seqs[topic] += 1
        last_t = t
        yield BusMessage(topic=topic, seq=seqs[topic], t=t, payload=payload)
    end_t = last_t if last_t is not None else 0.0
    yield BusMessage(topic=TOPIC_CONTROL, seq=1, t=end_t,
                     payload=ControlMessage(END_OF_STREAM))


def publish_replay(bus: MessageBus, can_log: str, imu_log: str, speed: float = 0.0,
                   strict: bool = True, stats: ReplayStats | None = None) -> None:
    """Drive a replay onto a bus; topics carry the merged ordering."""
    for msg in replay_merged(can_log, imu_log, speed=speed, strict=strict, stats=stats):
        bus.publish(msg.topic, msg.t, msg.payload)
