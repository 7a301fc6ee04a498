"""Pipeline wiring: bus messages in, discovery states and live events out.

One Pipeline instance consumes the merged CAN/IMU stream. CAN frames feed the
channel store; IMU samples are debiased, smoothed, and fanned out to one
reference series and detector per control. Detected events wait until both
the store and the reference cover their padded window, then feed the
per-control discovery engines. Listeners observe events, ranking rounds, and
terminal status changes; the same hooks serve the report writer and the
gateway.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .bus import (
    END_OF_STREAM, BusMessage, ControlMessage, MessageBus, TOPIC_CAN,
    TOPIC_CONTROL, TOPIC_IMU,
)
from .calibration import VehicleProfile
from .canbus import CanFrame, ChannelStore
from .config import SessionConfig
from .correlate import Mask, liveliness_mask
from .discovery import Discovery, DiscoveryState, RankingReport
from .errors import ConfigError
from .events import EventDetector, EventWindow, VehicleEvent, window, EVENT_KIND_FOR_CONTROL
from .imu import CONTROLS, DebiasSmoother, ImuSample, ReferenceSeries, reference_value


@dataclass
class PipelineListener:
    """Callback bundle for live observers; every hook is optional."""

    on_event: Callable[[str, VehicleEvent], None] | None = None
    on_round: Callable[[str, RankingReport], None] | None = None
    on_terminal: Callable[[str, DiscoveryState], None] | None = None
    on_can_frame: Callable[[CanFrame], None] | None = None


@dataclass
class SessionResult:
    vehicle: str
    states: dict[str, DiscoveryState]
    t_start: float | None
    t_end: float | None
    references: dict[str, ReferenceSeries] = field(default_factory=dict)
    store: ChannelStore | None = None
    windows: dict[str, list[EventWindow]] = field(default_factory=dict)


class Pipeline:
    def __init__(self, cfg: SessionConfig,
                 profile: VehicleProfile | None = None,
                 listeners: list[PipelineListener] | None = None):
        self.cfg = cfg
        self.profile = profile
        self.listeners = listeners or []
        self.store = ChannelStore(horizon=cfg.horizon)
        self.smoother = DebiasSmoother(cfg.bias_window, cfg.smooth_window)
        self.references = {c: ReferenceSeries(c) for c in CONTROLS}
        self.detectors = {
            c: EventDetector(EVENT_KIND_FOR_CONTROL[c], cfg.detectors[c])
            for c in CONTROLS
        }
        self.discoveries = {
            c: Discovery(c, cfg.discovery, mode=cfg.mode, rate=cfg.rate)
            for c in CONTROLS
        }
        self._pending: dict[str, list[EventWindow]] = {c: [] for c in CONTROLS}
        self._t0: float | None = None
        self._last_can_t: float | None = None
        self._finalized = False

    # --- mask selection ----------------------------------------------------

    def _mask_provider(self, control: str) -> Callable[[], Mask]:
        calibrated = (self.profile is not None
                      and control in self.profile.controls
                      and self.profile.controls[control].candidates)
        if calibrated:
            mask = self.profile.controls[control].mask()
            return lambda: mask
        return lambda: liveliness_mask(self.store, self.cfg.horizon,
                                       exclude_counters=self.cfg.exclude_counters)

    # --- message handling --------------------------------------------------

    def attach_to(self, bus: MessageBus) -> None:
        bus.attach(self.handle, TOPIC_CAN, TOPIC_IMU, TOPIC_CONTROL)

    def handle(self, msg: BusMessage) -> None:
        if self._t0 is None and msg.topic in (TOPIC_CAN, TOPIC_IMU):
            self._t0 = msg.t
        if msg.topic == TOPIC_CAN:
            self._on_can(msg.payload)
        elif msg.topic == TOPIC_IMU:
            self._on_imu(msg.payload)
        elif msg.topic == TOPIC_CONTROL:
            payload = msg.payload
            if isinstance(payload, ControlMessage) and payload.kind == END_OF_STREAM:
                self.finalize()

    def _on_can(self, frame: CanFrame) -> None:
        self.store.ingest(frame)
        self._last_can_t = frame.t
        for listener in self.listeners:
            if listener.on_can_frame:
                listener.on_can_frame(frame)
        self._release_ready()

    def _on_imu(self, sample: ImuSample) -> None:
        for smoothed in self.smoother.feed(sample):
            self._consume_smoothed(smoothed)
        self._release_ready()

    def _consume_smoothed(self, sample: ImuSample) -> None:
        for control in CONTROLS:
            value = reference_value(control, sample, self.cfg.axis_map,
                                    self.cfg.steering_source)
            ref = self.references[control]
            if ref.t and sample.t <= ref.t[-1]:
                continue  # duplicate timestamp from the source; keep the first
            ref.append(sample.t, value)
            event = self.detectors[control].feed(sample.t, value)
            if event is not None:
                self._on_detected(control, event)

    def _on_detected(self, control: str, event: VehicleEvent) -> None:
        win = window(event, self.cfg.detectors[control], rec_start=self._t0)
        self._pending[control].append(win)
        for listener in self.listeners:
            if listener.on_event:
                listener.on_event(control, event)

    def _cursor(self) -> float | None:
        """Time up to which both CAN and smoothed IMU data are complete."""
        ref_ts = [ref.t[-1] for ref in self.references.values() if ref.t]
        if self._last_can_t is None or not ref_ts:
            return None
        return min(self._last_can_t, min(ref_ts))

    def _release_ready(self, clamp_to: float | None = None) -> None:
        cursor = self._cursor() if clamp_to is None else clamp_to
        if cursor is None:
            return
        for control in CONTROLS:
            pending = self._pending[control]
            while pending and (pending[0].w_end <= cursor or clamp_to is not None):
                win = pending.pop(0)
                self._dispatch(control, win, cursor)

    def _dispatch(self, control: str, win: EventWindow, cursor: float) -> None:
        ref = self.references[control]
        if not ref.t:
            return
        w_start = max(win.w_start, ref.t[0])
        w_end = min(win.w_end, cursor)
        if w_end - w_start < 0.5:
            return  # degenerate clamp; nothing correlatable remains
        win = EventWindow(win.event, w_start, w_end)
        disc = self.discoveries[control]
        was_terminal = disc.state.terminal
        report = disc.on_event(
            win, self.store, ref, self._mask_provider(control),
            elapsed_s=w_end - (self._t0 if self._t0 is not None else 0.0))
        if report is not None:
            for listener in self.listeners:
                if listener.on_round:
                    listener.on_round(control, report)
        if not was_terminal and disc.state.terminal:
            for listener in self.listeners:
                if listener.on_terminal:
                    listener.on_terminal(control, disc.state)

    def finalize(self) -> None:
        """End of the recording: flush smoothing, close open events, release
        the remaining windows clamped at the data end, settle statuses."""
        if self._finalized:
            return
        self._finalized = True
        if self.smoother.started:
            for smoothed in self.smoother.flush():
                self._consume_smoothed(smoothed)
        for control in CONTROLS:
            ref = self.references[control]
            if ref.t:
                event = self.detectors[control].flush(ref.t[-1])
                if event is not None:
                    self._on_detected(control, event)
        cursor = self._cursor()
        if cursor is not None:
            self._release_ready(clamp_to=cursor)
        for control in CONTROLS:
            disc = self.discoveries[control]
            was_terminal = disc.state.terminal
            disc.finalize()
            if not was_terminal and disc.state.terminal:
                for listener in self.listeners:
                    if listener.on_terminal:
                        listener.on_terminal(control, disc.state)

    # --- results -----------------------------------------------------------

    @property
    def finalized(self) -> bool:
        return self._finalized

    def result(self) -> SessionResult:
        if not self._finalized:
            raise ConfigError("pipeline result requested before finalize")
        ref_end = [r.t[-1] for r in self.references.values() if r.t]
        return SessionResult(
            vehicle=self.cfg.vehicle,
            states={c: self.discoveries[c].state for c in CONTROLS},
            t_start=self._t0,
            t_end=max(ref_end) if ref_end else self._last_can_t,
            references=self.references,
            store=self.store,
            windows={c: list(self.discoveries[c].state.windows) for c in CONTROLS},
        )


def run_batch(can_log: str, imu_log: str, cfg: SessionConfig,
              profile: VehicleProfile | None = None,
              listeners: list[PipelineListener] | None = None) -> SessionResult:
    """Unpaced replay of both logs through a full pipeline."""
    from .bus import publish_replay

    bus = MessageBus()
    pipeline = Pipeline(cfg, profile=profile, listeners=listeners)
    pipeline.attach_to(bus)
    publish_replay(bus, can_log, imu_log, speed=0.0, strict=cfg.strict)
    pipeline.finalize()
    return pipeline.result()
