"""JSON gateway for the operator dashboard: message schema, session hub, and
a websocket fan-out server.

The hub turns pipeline callbacks into gateway messages and hands them to any
number of sinks: connected websocket clients (each behind a bounded queue so
a slow client is disconnected rather than back-pressuring inference) and the
transcript writer used for offline UI work. One JSON object per text frame;
every frame carries schema_version.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
from dataclasses import dataclass, field
from typing import Callable

from .calibration import CalibrationWizard, VehicleProfile
from .canbus import CanFrame, ChannelKey, channel_name, decode_channel, parse_channel_name
from .discovery import CONVERGED, DiscoveryState, NOT_IDENTIFIED, RankingReport
from .errors import CanRevealError, ParseError
from .events import VehicleEvent
from .imu import BRAKE, CONTROLS, STEERING, ACCELERATOR
from .session import Pipeline, PipelineListener

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1"

HELLO = "hello"
SNAPSHOT = "snapshot"
RANKING_UPDATE = "ranking_update"
EVENT_DETECTED = "event_detected"
DECODED_VALUE = "decoded_value"
CALIBRATION_PROMPT = "calibration_prompt"
CALIBRATION_ACK = "calibration_ack"
SELECT_CONTROL = "select_control"
CONVERGENCE = "convergence"
NOT_IDENTIFIED_MSG = "not_identified"
ERROR = "error"

CLIENT_TYPES = (SELECT_CONTROL, CALIBRATION_ACK, HELLO)


def message(msg_type: str, t: float, body: dict) -> dict:
    return {"schema_version": SCHEMA_VERSION, "type": msg_type,
            "t": round(float(t), 6), "body": body}


def scale_value(control: str, raw: float, lo: float, hi: float) -> float:
    """Normalize a raw channel value by its calibration range.

    Pedals map onto [0, 1]; steering onto [-1, 1] with the range midpoint at
    zero. A degenerate range yields 0.
    """
    if hi <= lo:
        return 0.0
    frac = (raw - lo) / (hi - lo)
    frac = max(0.0, min(1.0, frac))
    if control == STEERING:
        return 2.0 * frac - 1.0
    return frac


@dataclass
class _ControlView:
    status: str = "collecting"
    winner: str | None = None
    events_seen: int = 0
    rounds: int = 0
    latest_entries: list[dict] = field(default_factory=list)
    selected: ChannelKey | None = None
    selected_by: str = ""  # profile | operator | winner
    value_range: tuple[float, float] | None = None
    observed: tuple[float, float] | None = None
    last_push_t: float = float("-inf")


class GatewayHub:
    """Session-state tracker and message fan-out point."""

    def __init__(self, vehicle: str, profile: VehicleProfile | None = None,
                 push_hz: float = 20.0):
        self.vehicle = vehicle
        self.profile = profile
        self.push_interval = 1.0 / push_hz
        self._lock = threading.RLock()
        self._sinks: list[Callable[[dict], None]] = []
        self._views = {c: _ControlView() for c in CONTROLS}
        self._t_now = 0.0
        self.wizard: CalibrationWizard | None = None
        self.wizard_control: str | None = None
        self.on_wizard_done: Callable[[CalibrationWizard], None] | None = None
        if profile is not None:
            for control, cp in profile.controls.items():
                chosen = cp.chosen or (cp.candidates[0].key if cp.candidates else None)
                if chosen is not None:
                    self._select(control, chosen, by="profile")

    @property
    def t_now(self) -> float:
        return self._t_now

    # --- sinks --------------------------------------------------------------

    def add_sink(self, sink: Callable[[dict], None]) -> None:
        with self._lock:
            self._sinks.append(sink)

    def remove_sink(self, sink: Callable[[dict], None]) -> None:
        with self._lock:
            if sink in self._sinks:
                self._sinks.remove(sink)

    def _broadcast(self, msg: dict) -> None:
        with self._lock:
            sinks = list(self._sinks)
        for sink in sinks:
            sink(msg)

    # --- messages -----------------------------------------------------------

    def hello(self) -> dict:
        return message(HELLO, self._t_now, {"server": "canreveal",
                                            "schema_version": SCHEMA_VERSION})

    def snapshot(self) -> dict:
        with self._lock:
            controls = {
                control: {
                    "status": view.status,
                    "winner": view.winner,
                    "events_seen": view.events_seen,
                    "rounds": view.rounds,
                    "latest_entries": list(view.latest_entries),
                    "selected": channel_name(view.selected) if view.selected else None,
                }
                for control, view in self._views.items()
            }
        return message(SNAPSHOT, self._t_now, {"vehicle": self.vehicle,
                                               "controls": controls})

    # --- pipeline listener --------------------------------------------------

    def listener(self) -> PipelineListener:
        return PipelineListener(
            on_event=self._on_event,
            on_round=self._on_round,
            on_terminal=self._on_terminal,
            on_can_frame=self._on_can_frame,
        )

    def _on_event(self, control: str, event: VehicleEvent) -> None:
        self._t_now = max(self._t_now, event.t_off)
        with self._lock:
            self._views[control].events_seen += 1
        self._broadcast(message(EVENT_DETECTED, event.t_off, {
            "control": control, "kind": event.kind, "t_on": round(event.t_on, 6),
            "t_off": round(event.t_off, 6), "peak": round(event.peak, 6)}))

    def _on_round(self, control: str, report: RankingReport) -> None:
        entries = [{"id": e.key.id,
                    "channel": f"{e.key.order}_{e.key.start_byte}",
                    "correlation": abs(e.r)} for e in report.entries]
        with self._lock:
            view = self._views[control]
            view.rounds = report.round_index
            view.latest_entries = entries
        self._broadcast(message(RANKING_UPDATE, self._t_now, {
            "control": control, "round": report.round_index,
            "events_seen": report.events_seen,
            "elapsed_s": round(report.elapsed_s, 3), "entries": entries}))

    def _on_terminal(self, control: str, state: DiscoveryState) -> None:
        with self._lock:
            view = self._views[control]
            view.status = state.status
            view.winner = channel_name(state.winner) if state.winner else None
        if state.status == CONVERGED:
            # the converged winner supersedes a profile default, but an
            # explicit operator selection stays in force
            if self._views[control].selected_by != "operator":
                self._select(control, state.winner, by="winner")
            final = state.rounds[-1].top if state.rounds else None
            self._broadcast(message(CONVERGENCE, self._t_now, {
                "control": control,
                "winner": channel_name(state.winner),
                "correlation": abs(final.r) if final else None}))
        elif state.status == NOT_IDENTIFIED:
            self._broadcast(message(NOT_IDENTIFIED_MSG, self._t_now,
                                    {"control": control}))

    def _on_can_frame(self, frame: CanFrame) -> None:
        self._t_now = max(self._t_now, frame.t)
        for control in CONTROLS:
            with self._lock:
                view = self._views[control]
                key = view.selected
                if key is None or key.id != frame.id:
                    continue
                if key.start_byte + 2 > frame.dlc:
                    continue
                raw = decode_channel(frame.payload, key)
                lo_hi = view.value_range
                if lo_hi is None:
                    obs = view.observed
                    obs = ((min(obs[0], raw), max(obs[1], raw))
                           if obs else (raw, raw))
                    view.observed = obs
                    lo_hi = obs
                if frame.t - view.last_push_t < self.push_interval:
                    continue
                view.last_push_t = frame.t
                value = scale_value(control, raw, lo_hi[0], lo_hi[1])
                name = channel_name(key)
            self._broadcast(message(DECODED_VALUE, frame.t, {
                "control": control, "channel": name, "raw": raw,
                "value": round(value, 6)}))

    # --- selection and calibration ranges ------------------------------------

    def _select(self, control: str, key: ChannelKey, by: str = "operator") -> None:
        with self._lock:
            view = self._views[control]
            view.selected = key
            view.selected_by = by
            view.value_range = None
            view.observed = None
            view.last_push_t = float("-inf")
            if self.profile is not None and control in self.profile.controls:
                rng = self.profile.controls[control].range_for(key)
                if rng is not None:
                    view.value_range = (float(rng[0]), float(rng[1]))

    # --- wizard --------------------------------------------------------------

    def start_wizard(self, control: str, wizard: CalibrationWizard) -> None:
        with self._lock:
            self.wizard = wizard
            self.wizard_control = control
        step = wizard.start(self._t_now)
        self._push_prompt(wizard.step_index, step)

    def _push_prompt(self, index: int, step) -> None:
        self._broadcast(message(CALIBRATION_PROMPT, self._t_now, {
            "control": self.wizard_control, "step": index,
            "level": step.level, "hold": step.hold,
            "total_steps": len(self.wizard.schedule.steps)}))

    # --- inbound client traffic ----------------------------------------------

    def handle_client_message(self, doc: dict) -> None:
        """Route one parsed client frame; raises ParseError on violations."""
        if not isinstance(doc, dict):
            raise ParseError("client frame is not a JSON object")
        msg_type = doc.get("type")
        body = doc.get("body", {})
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ParseError(f"schema_version mismatch: {doc.get('schema_version')!r}")
        if msg_type not in CLIENT_TYPES:
            raise ParseError(f"unexpected client message type {msg_type!r}")
        if not isinstance(body, dict):
            raise ParseError("body is not an object")
        if msg_type == HELLO:
            return
        if msg_type == SELECT_CONTROL:
            control = body.get("control")
            if control not in CONTROLS:
                raise ParseError(f"unknown control {control!r}")
            if "channel" in body and body["channel"]:
                key = parse_channel_name(body["channel"])
            else:
                with self._lock:
                    view = self._views[control]
                    key = (parse_channel_name(view.winner)
                           if view.winner else view.selected)
            if key is not None:
                self._select(control, key)
            return
        if msg_type == CALIBRATION_ACK:
            with self._lock:
                wizard = self.wizard
            if wizard is None:
                raise ParseError("no calibration wizard active")
            step = body.get("step")
            if not isinstance(step, int):
                raise ParseError("calibration_ack.step must be an integer")
            if body.get("abort"):
                wizard.abort()
                return
            nxt = wizard.ack(step, self._t_now)
            if nxt is not None:
                self._push_prompt(wizard.step_index, nxt)
            elif wizard.finished and self.on_wizard_done is not None:
                self.on_wizard_done(wizard)
            return


class TranscriptWriter:
    """Collects gateway messages; writes one JSON object per line."""

    def __init__(self):
        self.messages: list[dict] = []

    def __call__(self, msg: dict) -> None:
        self.messages.append(msg)

    def record_handshake(self, hub: GatewayHub) -> None:
        """Capture the connect-time hello/snapshot. Call before the session
        runs so the snapshot reflects the state a client would first see."""
        self.messages.append(hub.hello())
        self.messages.append(hub.snapshot())

    def write(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fp:
            for msg in self.messages:
                fp.write(json.dumps(msg, sort_keys=True))
                fp.write("\n")


class GatewayServer:
    """Threaded websocket fan-out around a GatewayHub."""

    def __init__(self, hub: GatewayHub, host: str = "127.0.0.1", port: int = 8765,
                 client_queue: int = 16384):
        from websockets.sync.server import serve

        self.hub = hub
        self.client_queue = client_queue
        self._server = serve(self._handler, host, port)
        self.port = self._server.socket.getsockname()[1]
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        name="gateway", daemon=True)

    def start(self) -> "GatewayServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._thread.join(timeout=5.0)

    def _handler(self, conn) -> None:
        outbound: queue.Queue = queue.Queue(maxsize=self.client_queue)
        dead = threading.Event()

        def sink(msg: dict) -> None:
            if dead.is_set():
                return
            try:
                outbound.put_nowait(msg)
            except queue.Full:
                dead.set()  # slow client: drop it, never block the pipeline

        def sender() -> None:
            while not dead.is_set():
                try:
                    msg = outbound.get(timeout=0.25)
                except queue.Empty:
                    continue
                if msg is None:
                    return
                try:
                    conn.send(json.dumps(msg, sort_keys=True))
                except Exception:
                    dead.set()

        self.hub.add_sink(sink)
        sender_thread = threading.Thread(target=sender, daemon=True)
        sender_thread.start()
        try:
            sink(self.hub.hello())
            sink(self.hub.snapshot())
            while not dead.is_set():
                try:
                    raw = conn.recv(timeout=0.25)
                except TimeoutError:
                    continue
                except Exception:
                    break
                try:
                    doc = json.loads(raw)
                    self.hub.handle_client_message(doc)
                except (json.JSONDecodeError, CanRevealError) as e:
                    try:
                        conn.send(json.dumps(message(ERROR, self.hub.t_now,
                                                     {"reason": str(e)})))
                    except Exception:
                        pass
                    try:
                        conn.close(code=1002, reason="protocol violation")
                    except Exception:
                        pass
                    break
        finally:
            self.hub.remove_sink(sink)
            dead.set()
            try:
                outbound.put_nowait(None)
            except queue.Full:
                pass
            sender_thread.join(timeout=2.0)
