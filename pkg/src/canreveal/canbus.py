"""CAN frame model, candump-format log parsing, and 16-bit channel hypotheses.

Payloads are cut into overlapping byte-aligned 16-bit windows, one per start
byte, in both byte orders. Each window is a candidate channel named
"<id decimal>_<msb|lsb>_<start byte>". A ChannelStore keeps the decoded
time series per channel for windowed queries.
"""

from __future__ import annotations

import bisect
import re
import threading
from array import array
from dataclasses import dataclass, field
from typing import Iterable, Iterator, TextIO

import numpy as np

from .errors import DecodeError, FrameError, ParseError

MSB = "msb"
LSB = "lsb"

STANDARD_ID_MAX = 1 << 11
EXTENDED_ID_MAX = 1 << 29


@dataclass(frozen=True)
class CanFrame:
    """One raw CAN frame: timestamp, arbitration id, and up to 8 payload bytes."""

    t: float
    id: int
    extended: bool
    dlc: int
    payload: bytes

    def __post_init__(self):
        limit = EXTENDED_ID_MAX if self.extended else STANDARD_ID_MAX
        if not 0 <= self.id < limit:
            raise FrameError(f"arbitration id {self.id} out of range "
                             f"({'extended' if self.extended else 'standard'})")
        if not 0 <= self.dlc <= 8:
            raise FrameError(f"dlc {self.dlc} out of range 0..8")
        if len(self.payload) != self.dlc:
            raise FrameError(f"payload length {len(self.payload)} != dlc {self.dlc}")


@dataclass(frozen=True, order=True)
class ChannelKey:
    """A 16-bit byte-aligned window into one message's payload."""

    id: int
    order: str  # MSB or LSB
    start_byte: int

    def __post_init__(self):
        if self.order not in (MSB, LSB):
            raise ValueError(f"unknown byte order {self.order!r}")
        if self.start_byte < 0:
            raise ValueError(f"negative start byte {self.start_byte}")

    @property
    def name(self) -> str:
        return channel_name(self)

    def __str__(self) -> str:
        return channel_name(self)


@dataclass
class ChannelSeries:
    """Decoded sample series for one channel; timestamps strictly increase.

    Columns are array('d') so numpy conversion goes through the buffer
    protocol rather than per-element iteration.
    """

    key: ChannelKey
    t: array = field(default_factory=lambda: array("d"))
    values: array = field(default_factory=lambda: array("d"))

    def __len__(self) -> int:
        return len(self.t)

    @property
    def samples(self) -> list[tuple[float, int]]:
        return [(tt, int(vv)) for tt, vv in zip(self.t, self.values)]


_CANDUMP_RE = re.compile(
    r"^\((\d+(?:\.\d+)?)\)\s+(\S+)\s+([0-9A-Fa-f]{3}|[0-9A-Fa-f]{8})#([0-9A-Fa-f]*)$"
)


def parse_candump_line(line: str, line_no: int | None = None) -> CanFrame:
    """Parse one candump-format record: "(<secs>) <iface> <HEXID>#<HEXBYTES>".

    A 3-digit hex id is a standard frame, an 8-digit id an extended frame.
    """
    m = _CANDUMP_RE.match(line.strip())
    if m is None:
        raise ParseError(f"not a candump record: {line.strip()!r}", line_no)
    t_text, _iface, id_text, data_text = m.groups()
    if len(data_text) % 2 != 0:
        raise ParseError(f"odd payload hex length in {line.strip()!r}", line_no)
    if len(data_text) // 2 > 8:
        raise FrameError(f"dlc {len(data_text) // 2} exceeds 8"
                         + (f" (line {line_no})" if line_no else ""))
    return CanFrame(
        t=float(t_text),
        id=int(id_text, 16),
        extended=len(id_text) == 8,
        dlc=len(data_text) // 2,
        payload=bytes.fromhex(data_text),
    )


def iter_candump(fp: TextIO, strict: bool = True,
                 skipped: list[int] | None = None) -> Iterator[CanFrame]:
    """Yield frames from a candump log. '#'-prefixed lines are comments.

    In strict mode a malformed record aborts with its line number; in lenient
    mode it is skipped and its line number appended to `skipped`.
    """
    for line_no, line in enumerate(fp, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            yield parse_candump_line(stripped, line_no)
        except (ParseError, FrameError):
            if strict:
                raise
            if skipped is not None:
                skipped.append(line_no)


def enumerate_channel_keys(id: int, dlc: int) -> list[ChannelKey]:
    """All 16-bit window hypotheses for a message: start bytes 0..dlc-2, both orders."""
    if not 0 <= dlc <= 8:
        raise FrameError(f"dlc {dlc} out of range 0..8")
    if dlc < 2:
        return []
    return ([ChannelKey(id, MSB, k) for k in range(dlc - 1)]
            + [ChannelKey(id, LSB, k) for k in range(dlc - 1)])


def decode_channel(payload: bytes, key: ChannelKey) -> int:
    """Decode the 16-bit window at key.start_byte in the key's byte order."""
    k = key.start_byte
    if k + 2 > len(payload):
        raise DecodeError(f"window {key} out of range for {len(payload)}-byte payload")
    if key.order == MSB:
        return payload[k] * 256 + payload[k + 1]
    return payload[k + 1] * 256 + payload[k]


_NAME_RE = re.compile(r"^(\d+)_(msb|lsb)_(\d+)$")


def channel_name(key: ChannelKey) -> str:
    """Canonical channel name, arbitration id in decimal."""
    return f"{key.id}_{key.order}_{key.start_byte}"


def parse_channel_name(name: str) -> ChannelKey:
    m = _NAME_RE.match(name.strip())
    if m is None:
        raise ParseError(f"not a channel name: {name!r}")
    return ChannelKey(int(m.group(1)), m.group(2), int(m.group(3)))


class ChannelStore:
    """Time-indexed store of decoded channel series with a retention horizon.

    Single writer (the CAN ingest stage); queries return immutable numpy
    snapshots and are safe from other threads.
    """

    def __init__(self, horizon: float = 600.0):
        self.horizon = horizon
        self._series: dict[ChannelKey, ChannelSeries] = {}
        self._keys_cache: dict[tuple[int, int], list[ChannelKey]] = {}
        self._lock = threading.Lock()
        self._last_t: float | None = None
        self._frames = 0

    def __len__(self) -> int:
        return len(self._series)

    @property
    def last_t(self) -> float | None:
        return self._last_t

    @property
    def frames_ingested(self) -> int:
        return self._frames

    def ingest(self, frame: CanFrame) -> None:
        cache_key = (frame.id, frame.dlc)
        keys = self._keys_cache.get(cache_key)
        if keys is None:
            keys = enumerate_channel_keys(frame.id, frame.dlc)
            self._keys_cache[cache_key] = keys
        with self._lock:
            self._frames += 1
            self._last_t = frame.t
            for key in keys:
                series = self._series.get(key)
                if series is None:
                    series = self._series[key] = ChannelSeries(key)
                # out-of-order or duplicate timestamps would corrupt queries
                if series.t and frame.t <= series.t[-1]:
                    continue
                series.t.append(frame.t)
                series.values.append(decode_channel(frame.payload, key))
            if self._frames % 4096 == 0:
                self._trim(frame.t - self.horizon)

    def _trim(self, cutoff: float) -> None:
        for series in self._series.values():
            i = bisect.bisect_left(series.t, cutoff)
            if i:
                del series.t[:i]
                del series.values[:i]

    def keys(self) -> list[ChannelKey]:
        with self._lock:
            return sorted(self._series.keys(), key=channel_name)

    def query(self, key: ChannelKey, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
        """Retained samples with a <= t <= b, as an immutable snapshot.

        Retention is exact here: samples older than the horizon are never
        returned even if physical trimming (which is amortized) lags.
        """
        with self._lock:
            series = self._series.get(key)
            if series is None:
                return np.empty(0), np.empty(0)
            if self._last_t is not None:
                a = max(a, self._last_t - self.horizon)
            lo = bisect.bisect_left(series.t, a)
            hi = bisect.bisect_right(series.t, b)
            return (np.frombuffer(series.t[lo:hi]),
                    np.frombuffer(series.values[lo:hi]))

    def covering(self, key: ChannelKey, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
        """Samples spanning [a, b], including one bracketing sample each side
        when available. Empty result if the channel has no samples."""
        with self._lock:
            series = self._series.get(key)
            if series is None or not series.t:
                return np.empty(0), np.empty(0)
            lo = bisect.bisect_left(series.t, a)
            if lo > 0:
                lo -= 1
            hi = bisect.bisect_right(series.t, b)
            if hi < len(series.t):
                hi += 1
            return (np.frombuffer(series.t[lo:hi]),
                    np.frombuffer(series.values[lo:hi]))

    def covers(self, key: ChannelKey, a: float, b: float) -> bool:
        with self._lock:
            series = self._series.get(key)
            if series is None or not series.t:
                return False
            return series.t[0] <= a and series.t[-1] >= b
