"""Minimal DBC subset: BO_/SG_ parsing and channel/signal bit-overlap checks.

Only message and signal definitions are read; value tables, comments,
attributes, multiplexing, and generator directives are ignored. Bit index
convention: index b is byte b//8, bit b%8, where bit 7 of a byte is its MSB.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import DomainError, ParseError
from .canbus import ChannelKey

BIG_ENDIAN = "big_endian"      # DBC @0, Motorola
LITTLE_ENDIAN = "little_endian"  # DBC @1, Intel


@dataclass(frozen=True)
class DbcSignal:
    name: str
    start_bit: int
    length: int
    byte_order: str
    signed: bool
    scale: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if not 0 <= self.start_bit <= 63:
            raise ParseError(f"signal {self.name}: start bit {self.start_bit} out of range")
        if not 1 <= self.length <= 64:
            raise ParseError(f"signal {self.name}: length {self.length} out of range")
        if self.byte_order not in (BIG_ENDIAN, LITTLE_ENDIAN):
            raise ParseError(f"signal {self.name}: unknown byte order {self.byte_order!r}")


@dataclass
class DbcMessage:
    id: int
    name: str
    dlc: int
    signals: list[DbcSignal] = field(default_factory=list)

    def signal(self, name: str) -> DbcSignal:
        for s in self.signals:
            if s.name == name:
                return s
        raise DomainError(f"message {self.id} has no signal {name!r}")


# "BO_ 241 EBCMBrakePedalPosition: 6 K17_EBCM"; some published excerpts
# carry a zero instead of the letter O, and a leading line-number column.
_BO_RE = re.compile(r"^B[O0]_\s+(\d+)\s+([^\s:]+)\s*:\s*(\d+)(?:\s+(\S+))?\s*$")
# 'SG_ BrakePedalPosition : 15|8@0+ (1,0) [0|255] "" NEO'
_SG_RE = re.compile(
    r"^SG_\s+(\S+)\s*(?:m\d+|M)?\s*:\s*(\d+)\|(\d+)@(\d)([+-])"
    r"(?:\s*\(\s*([^,()]+)\s*,\s*([^,()]+)\s*\))?"
)
_LINENO_RE = re.compile(r"^\d+\s+(\S.*)$")


def parse_dbc_min(text: str) -> list[DbcMessage]:
    """Parse every BO_ block with its SG_ lines; all other lines are ignored.

    Lines may carry a leading line-number column (as in published file
    excerpts); it is stripped before matching.
    """
    messages: list[DbcMessage] = []
    current: DbcMessage | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not (line.startswith(("BO_", "B0_", "SG_"))):
            m = _LINENO_RE.match(line)
            if m:
                line = m.group(1)
        if line.startswith(("BO_", "B0_")):
            m = _BO_RE.match(line)
            if m is None:
                raise ParseError(f"malformed BO_ line: {raw.strip()!r}", line_no)
            current = DbcMessage(id=int(m.group(1)), name=m.group(2), dlc=int(m.group(3)))
            messages.append(current)
        elif line.startswith("SG_"):
            m = _SG_RE.match(line)
            if m is None:
                raise ParseError(f"malformed SG_ line: {raw.strip()!r}", line_no)
            if m.group(4) not in ("0", "1"):
                raise ParseError(f"byte order must be 0 or 1: {raw.strip()!r}", line_no)
            if current is None:
                raise ParseError("SG_ line before any BO_ line", line_no)
            try:
                signal = DbcSignal(
                    name=m.group(1),
                    start_bit=int(m.group(2)),
                    length=int(m.group(3)),
                    byte_order=BIG_ENDIAN if m.group(4) == "0" else LITTLE_ENDIAN,
                    signed=m.group(5) == "-",
                    scale=float(m.group(6)) if m.group(6) is not None else 1.0,
                    offset=float(m.group(7)) if m.group(7) is not None else 0.0,
                )
            except ParseError as e:
                raise ParseError(str(e), line_no) from None
            if any(s.name == signal.name for s in current.signals):
                raise ParseError(f"duplicate signal {signal.name!r} in message "
                                 f"{current.id}", line_no)
            current.signals.append(signal)
    return messages


def signal_bit_walk(signal: DbcSignal, dlc: int) -> list[int]:
    """Payload bit indices occupied by the signal, in walk order.

    Big-endian walks from the start bit downward within a byte, continuing at
    the next byte's bit 7, so the walk runs from the signal's MSB to its LSB;
    little-endian walks upward from the start bit, LSB to MSB.
    """
    bits: list[int] = []
    b = signal.start_bit
    for _ in range(signal.length):
        if not 0 <= b < dlc * 8:
            raise DomainError(
                f"signal {signal.name} walks outside the {dlc}-byte payload (bit {b})")
        bits.append(b)
        if signal.byte_order == BIG_ENDIAN:
            b = b + 15 if b % 8 == 0 else b - 1
        else:
            b += 1
    return bits


def signal_bit_positions(signal: DbcSignal, dlc: int) -> set[int]:
    """Payload bit indices occupied by the signal."""
    return set(signal_bit_walk(signal, dlc))


def channel_bits(key: ChannelKey) -> set[int]:
    """Bit indices covered by a 16-bit channel window (byte order irrelevant)."""
    return set(range(8 * key.start_byte, 8 * key.start_byte + 16))


def channel_overlap(key: ChannelKey, message: DbcMessage,
                    signal: DbcSignal) -> tuple[int, float]:
    """Overlap between a channel window and a signal in the same message.

    Returns (overlap_bits, signal_coverage) where coverage is the fraction of
    the signal's bits that fall inside the channel window.
    """
    if key.id != message.id:
        raise DomainError(f"channel id {key.id} does not match message id {message.id}")
    sig_bits = signal_bit_positions(signal, message.dlc)
    overlap = len(channel_bits(key) & sig_bits)
    return overlap, overlap / signal.length


def overlap_report(key: ChannelKey, messages: list[DbcMessage]) -> list[dict]:
    """Overlap records for a channel against every signal of its message."""
    records = []
    for message in messages:
        if message.id != key.id:
            continue
        for signal in message.signals:
            bits, coverage = channel_overlap(key, message, signal)
            records.append({
                "channel": key.name,
                "message": message.name,
                "signal": signal.name,
                "overlap_bits": bits,
                "coverage": coverage,
            })
    if not records:
        raise DomainError(f"no message with id {key.id} in the DBC document")
    return records
