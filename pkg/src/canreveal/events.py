"""Threshold/hysteresis detection of acceleration, deceleration, and steering
events on reference series, with bounded pre/post context windows."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError
from .imu import ACCELERATOR, BRAKE, STEERING, ReferenceSeries

ACCELERATION = "acceleration"
DECELERATION = "deceleration"
STEERING_EVENT = "steering"

EVENT_KIND_FOR_CONTROL = {
    ACCELERATOR: ACCELERATION,
    BRAKE: DECELERATION,
    STEERING: STEERING_EVENT,
}


@dataclass(frozen=True)
class DetectorConfig:
    on_threshold: float
    off_threshold: float
    min_duration: float = 1.0
    pre_pad: float = 2.0
    post_pad: float = 2.0
    refractory: float = 1.0
    absolute: bool = False  # detect on |value|: turns in either direction count

    def __post_init__(self):
        if not 0 < self.off_threshold < self.on_threshold:
            raise ConfigError("need 0 < off_threshold < on_threshold")
        if self.min_duration <= 0:
            raise ConfigError("min_duration must be > 0")
        if self.pre_pad < 0 or self.post_pad < 0:
            raise ConfigError("pads must be >= 0")
        if self.refractory < 0:
            raise ConfigError("refractory must be >= 0")


PEDAL_DEFAULTS = DetectorConfig(on_threshold=1.0, off_threshold=0.4)
STEERING_DEFAULTS = DetectorConfig(on_threshold=0.15, off_threshold=0.06, absolute=True)


def default_detector_config(control: str) -> DetectorConfig:
    return STEERING_DEFAULTS if control == STEERING else PEDAL_DEFAULTS


@dataclass(frozen=True)
class VehicleEvent:
    kind: str
    t_on: float
    t_off: float
    peak: float

    @property
    def duration(self) -> float:
        return self.t_off - self.t_on


@dataclass(frozen=True)
class EventWindow:
    event: VehicleEvent
    w_start: float
    w_end: float


class EventDetector:
    """Streaming hysteresis state machine for one event kind.

    An event opens when the detection statistic first reaches on_threshold,
    closes when it first drops below off_threshold, and is emitted only if it
    lasted min_duration. A refractory delay after t_off suppresses re-opening.
    """

    def __init__(self, kind: str, cfg: DetectorConfig):
        self.kind = kind
        self.cfg = cfg
        self._open_t: float | None = None
        self._peak = 0.0
        self._last_off: float | None = None

    def _stat(self, value: float) -> float:
        return abs(value) if self.cfg.absolute else value

    def feed(self, t: float, value: float) -> VehicleEvent | None:
        stat = self._stat(value)
        if self._open_t is None:
            blocked = (self._last_off is not None
                       and t - self._last_off < self.cfg.refractory)
            if stat >= self.cfg.on_threshold and not blocked:
                self._open_t = t
                self._peak = stat
            return None
        self._peak = max(self._peak, stat)
        if stat < self.cfg.off_threshold:
            return self._close(t)
        return None

    def _close(self, t_off: float) -> VehicleEvent | None:
        t_on = self._open_t
        self._open_t = None
        self._last_off = t_off
        if t_off - t_on < self.cfg.min_duration:
            return None
        return VehicleEvent(kind=self.kind, t_on=t_on, t_off=t_off, peak=self._peak)

    def flush(self, t_end: float) -> VehicleEvent | None:
        """Close any open event at the end of the recording."""
        if self._open_t is None:
            return None
        return self._close(t_end)


def detect(ref: ReferenceSeries, cfg: DetectorConfig,
           kind: str | None = None) -> list[VehicleEvent]:
    """Run the state machine over a complete reference series."""
    if kind is None:
        kind = EVENT_KIND_FOR_CONTROL.get(ref.control, ref.control)
    det = EventDetector(kind, cfg)
    events = []
    for t, v in zip(ref.t, ref.values):
        ev = det.feed(t, v)
        if ev is not None:
            events.append(ev)
    if ref.t:
        ev = det.flush(ref.t[-1])
        if ev is not None:
            events.append(ev)
    return events


def window(event: VehicleEvent, cfg: DetectorConfig,
           rec_start: float | None = None,
           rec_end: float | None = None) -> EventWindow:
    """Pad the event with pre/post context, clamped at recording bounds."""
    w_start = event.t_on - cfg.pre_pad
    w_end = event.t_off + cfg.post_pad
    if rec_start is not None:
        w_start = max(w_start, rec_start)
    if rec_end is not None:
        w_end = min(w_end, rec_end)
    return EventWindow(event=event, w_start=w_start, w_end=w_end)
