"""Synthetic vehicle oracle: scripted maneuvers produce matched CAN and IMU
logs with a known signal map plus decoy traffic.

Longitudinal acceleration follows the pedal commands, speed integrates it and
clamps at zero (a held brake at standstill produces no inertial response),
and yaw rate follows steering scaled by speed. Ground-truth control signals
are bit-packed into their messages alongside rolling counters and checksum
bytes; decoys emit counter, constant, random-walk, and engine-speed traffic.
Equal seeds give byte-identical logs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Callable

import numpy as np

from .errors import ScenarioError
from .canbus import LSB, MSB, ChannelKey
from .dbc import BIG_ENDIAN, LITTLE_ENDIAN, DbcSignal, signal_bit_walk
from .imu import ACCELERATOR, BRAKE, CONTROLS, STEERING

ACCELERATE = "accelerate"
BRAKE_MANEUVER = "brake"
STEER_LEFT = "steer_left"
STEER_RIGHT = "steer_right"
CALIBRATE_PREFIX = "calibrate_"

DRIVE_KINDS = (ACCELERATE, BRAKE_MANEUVER, STEER_LEFT, STEER_RIGHT)
MANEUVER_KINDS = DRIVE_KINDS + tuple(CALIBRATE_PREFIX + c for c in CONTROLS)


@dataclass(frozen=True)
class Maneuver:
    kind: str
    t_start: float
    magnitude: float
    hold: float

    def __post_init__(self):
        if self.kind not in MANEUVER_KINDS:
            raise ScenarioError(f"unknown maneuver kind {self.kind!r}")
        if self.hold <= 0:
            raise ScenarioError("maneuver hold must be > 0")
        lo = -1.0 if self.kind == CALIBRATE_PREFIX + STEERING else 0.0
        if not lo <= self.magnitude <= 1.0:
            raise ScenarioError(
                f"magnitude {self.magnitude} out of [{lo}, 1] for {self.kind}")

    @property
    def t_end(self) -> float:
        return self.t_start + self.hold

    def control(self) -> str:
        if self.kind == ACCELERATE:
            return ACCELERATOR
        if self.kind == BRAKE_MANEUVER:
            return BRAKE
        if self.kind in (STEER_LEFT, STEER_RIGHT):
            return STEERING
        return self.kind[len(CALIBRATE_PREFIX):]


@dataclass
class Scenario:
    duration: float
    stationary_lead: float
    maneuvers: list[Maneuver]
    seed: int = 0

    def validate(self) -> None:
        per_control: dict[str, list[Maneuver]] = {}
        for m in self.maneuvers:
            if m.t_start < self.stationary_lead:
                raise ScenarioError(
                    f"maneuver at {m.t_start}s starts inside the stationary lead")
            if m.t_end > self.duration:
                raise ScenarioError(f"maneuver at {m.t_start}s ends after duration")
            per_control.setdefault(m.control(), []).append(m)
        for control, ms in per_control.items():
            ms = sorted(ms, key=lambda m: m.t_start)
            for a, b in zip(ms, ms[1:]):
                if b.t_start < a.t_end:
                    raise ScenarioError(
                        f"overlapping {control} maneuvers at {a.t_start}s and {b.t_start}s")


@dataclass(frozen=True)
class TruthSignal:
    """One control signal's encoding: raw = round(offset + scale * value)."""

    id: int
    period: float
    start_bit: int
    length: int
    byte_order: str
    scale: float
    offset: float
    dlc: int = 8
    name: str = ""
    message_name: str = ""
    counter_byte: int | None = None
    checksum_byte: int | None = None
    pressed_bit: int | None = None  # companion flag bit set while value > 0.05
    pressed_name: str = "Pressed"

    def signal_bytes(self) -> set[int]:
        sig = DbcSignal(self.name or "signal", self.start_bit, self.length,
                        self.byte_order, signed=False)
        return {b // 8 for b in signal_bit_walk(sig, self.dlc)}

    def physical_range(self, control: str) -> tuple[float, float]:
        lo = -1.0 if control == STEERING else 0.0
        return lo, 1.0

    def encode(self, value: float) -> int:
        raw = round(self.offset + self.scale * value)
        return max(0, min((1 << self.length) - 1, raw))


@dataclass(frozen=True)
class Decoy:
    id: int
    period: float
    kind: str  # counter | constant | random_walk | engine_rpm
    dlc: int = 8


@dataclass
class GroundTruthMap:
    signals: dict[str, TruthSignal]
    decoys: list[Decoy] = field(default_factory=list)

    def validate(self) -> None:
        ids = [s.id for s in self.signals.values()] + [d.id for d in self.decoys]
        if len(ids) != len(set(ids)):
            raise ScenarioError("duplicate message ids in ground truth map")
        for control in self.signals:
            if control not in CONTROLS:
                raise ScenarioError(f"unknown control {control!r} in ground truth map")

    def winning_channels(self, control: str) -> set[ChannelKey]:
        """Channel hypotheses whose 16-bit window fully covers the signal bits."""
        sig = self.signals[control]
        dbc_sig = DbcSignal(sig.name or control, sig.start_bit, sig.length,
                            sig.byte_order, signed=False)
        bits = set(signal_bit_walk(dbc_sig, sig.dlc))
        keys = set()
        for start in range(sig.dlc - 1):
            window = set(range(8 * start, 8 * start + 16))
            if bits <= window:
                keys.add(ChannelKey(sig.id, MSB, start))
                keys.add(ChannelKey(sig.id, LSB, start))
        return keys


@dataclass(frozen=True)
class DynamicsConfig:
    A_max: float = 3.0            # m/s^2 at full accelerator
    B_max: float = 4.0            # m/s^2 at full brake
    yaw_gain: float = 0.5         # rad/s per unit steering at reference speed
    v_ref: float = 5.0            # m/s where steering reaches full yaw authority
    accel_noise_sd: float = 0.15  # m/s^2
    gyro_noise_sd: float = 0.02   # rad/s
    imu_rate: float = 100.0       # Hz
    gravity: float = 9.81
    ramp: float = 0.3             # s, linear rise/fall inside each maneuver
    rpm_idle: float = 800.0
    rpm_gain: float = 3000.0      # rpm per unit pedal
    rpm_tau: float = 1.5          # s, engine speed lag behind the pedal

    def __post_init__(self):
        if min(self.A_max, self.B_max, self.yaw_gain, self.v_ref, self.imu_rate) <= 0:
            raise ScenarioError("dynamics gains and rates must be > 0")
        if self.accel_noise_sd < 0 or self.gyro_noise_sd < 0:
            raise ScenarioError("noise levels must be >= 0")


def default_truth() -> GroundTruthMap:
    """Fixture signal map; ids follow common GM-style numbering."""
    return GroundTruthMap(
        signals={
            ACCELERATOR: TruthSignal(
                id=201, period=0.04, start_bit=39, length=16,
                byte_order=BIG_ENDIAN, scale=2000.0, offset=1000.0, dlc=8,
                name="AcceleratorPosition", message_name="AcceleratorStatus",
                counter_byte=0, checksum_byte=3),
            BRAKE: TruthSignal(
                id=241, period=0.04, start_bit=15, length=8,
                byte_order=BIG_ENDIAN, scale=200.0, offset=20.0, dlc=6,
                name="BrakePedalPosition", message_name="BrakeStatus",
                counter_byte=5, checksum_byte=2, pressed_bit=1,
                pressed_name="BrakePressed"),
            STEERING: TruthSignal(
                id=564, period=0.04, start_bit=23, length=16,
                byte_order=BIG_ENDIAN, scale=1200.0, offset=32768.0, dlc=8,
                name="SteeringPosition", message_name="SteeringStatus",
                counter_byte=0, checksum_byte=1),
        },
        decoys=[
            Decoy(id=1034, period=0.1, kind="counter"),
            Decoy(id=1040, period=0.2, kind="constant"),
            Decoy(id=1050, period=0.1, kind="random_walk"),
            Decoy(id=401, period=0.04, kind="engine_rpm"),
        ],
    )


def randomized_truth(seed: int) -> GroundTruthMap:
    """Randomized ids, byte positions, orders, and scales for robustness tests."""
    rng = np.random.default_rng([seed, 0x7274])
    ids = rng.choice(np.arange(256, 2047), size=7, replace=False).tolist()
    signals = {}
    for i, control in enumerate(CONTROLS):
        order = BIG_ENDIAN if rng.integers(0, 2) == 0 else LITTLE_ENDIAN
        length = 8 if control == BRAKE else 16
        start_byte = int(rng.integers(2, 7 if length == 16 else 8 - 1))
        if length == 16 and start_byte > 6:
            start_byte = 6
        if order == BIG_ENDIAN:
            start_bit = 8 * start_byte + 7
        else:
            start_bit = 8 * start_byte
        limit = (1 << length) - 1
        if control == STEERING:
            offset = limit / 2
            scale = float(rng.uniform(0.05, 0.35)) * limit / 2
        else:
            offset = float(rng.uniform(0.02, 0.1)) * limit
            scale = float(rng.uniform(0.2, 0.8)) * limit
        signals[control] = TruthSignal(
            id=int(ids[i]), period=0.04, start_bit=start_bit, length=length,
            byte_order=order, scale=scale, offset=offset, dlc=8,
            name=f"{control.capitalize()}Position",
            message_name=f"{control.capitalize()}Status",
            counter_byte=0 if start_byte >= 2 else 7,
            checksum_byte=start_byte - 1 if start_byte >= 2 else start_byte + 2)
    decoys = [
        Decoy(id=int(ids[3]), period=0.1, kind="counter"),
        Decoy(id=int(ids[4]), period=0.2, kind="constant"),
        Decoy(id=int(ids[5]), period=0.1, kind="random_walk"),
        Decoy(id=int(ids[6]), period=0.04, kind="engine_rpm"),
    ]
    return GroundTruthMap(signals=signals, decoys=decoys)


class _InputProfile:
    """Piecewise trapezoidal command level for one control."""

    def __init__(self, maneuvers: list[Maneuver], ramp: float, drive_only: bool):
        self.segments = []
        for m in maneuvers:
            if drive_only and m.kind.startswith(CALIBRATE_PREFIX):
                continue
            if not drive_only and not m.kind.startswith(CALIBRATE_PREFIX):
                continue
            sign = -1.0 if m.kind == STEER_RIGHT else 1.0
            r = min(ramp, m.hold / 4)
            self.segments.append((m.t_start, m.t_end, sign * m.magnitude, r))

    def __call__(self, t: float) -> float:
        for t0, t1, level, r in self.segments:
            if t0 <= t < t1:
                if r > 0 and t < t0 + r:
                    return level * (t - t0) / r
                if r > 0 and t > t1 - r:
                    return level * (t1 - t) / r
                return level
        return 0.0


def _control_inputs(scenario: Scenario, dynamics: DynamicsConfig
                    ) -> dict[str, dict[str, Callable[[float], float]]]:
    by_control: dict[str, list[Maneuver]] = {c: [] for c in CONTROLS}
    for m in scenario.maneuvers:
        by_control[m.control()].append(m)
    return {
        c: {
            "drive": _InputProfile(by_control[c], dynamics.ramp, drive_only=True),
            "calibration": _InputProfile(by_control[c], dynamics.ramp, drive_only=False),
        }
        for c in CONTROLS
    }


def _engine_running(scenario: Scenario) -> bool:
    return any(m.kind in DRIVE_KINDS or m.kind == CALIBRATE_PREFIX + STEERING
               for m in scenario.maneuvers)


def pack_signal(payload: bytearray, signal: DbcSignal, dlc: int, raw: int) -> None:
    """Write raw into the payload along the signal's bit walk."""
    walk = signal_bit_walk(signal, dlc)
    n = signal.length
    for i, b in enumerate(walk):
        if signal.byte_order == BIG_ENDIAN:
            bit = (raw >> (n - 1 - i)) & 1
        else:
            bit = (raw >> i) & 1
        byte_i, bit_i = b // 8, b % 8
        if bit:
            payload[byte_i] |= 1 << bit_i
        else:
            payload[byte_i] &= ~(1 << bit_i)


@dataclass
class SimulationOutput:
    can_log: str
    imu_log: str
    truth_dbc: str
    annotations: list[dict]


def _emission_times(msg_id: int, period: float, duration: float) -> np.ndarray:
    # deterministic per-id phase staggers message timing off exact multiples
    phase = ((msg_id * 2654435761) % (1 << 20)) / (1 << 20) * period
    n = int(math.floor((duration - phase) / period)) + 1
    return phase + np.arange(max(0, n)) * period


def simulate(scenario: Scenario, truth: GroundTruthMap | None = None,
             dynamics: DynamicsConfig | None = None) -> SimulationOutput:
    """Generate matched CAN/IMU logs, the truth DBC text, and event annotations."""
    truth = truth if truth is not None else default_truth()
    dynamics = dynamics if dynamics is not None else DynamicsConfig()
    scenario.validate()
    truth.validate()

    inputs = _control_inputs(scenario, dynamics)
    engine_on = _engine_running(scenario)

    def drive_level(control: str, t: float) -> float:
        return inputs[control]["drive"](t)

    def can_level(control: str, t: float) -> float:
        return inputs[control]["drive"](t) + inputs[control]["calibration"](t)

    # --- IMU stream: integrate speed so a held brake at rest reads zero ---
    dt = 1.0 / dynamics.imu_rate
    n_steps = int(math.floor(scenario.duration / dt)) + 1
    rng = np.random.default_rng([scenario.seed, 0x1731])
    noise = rng.normal(0.0, 1.0, size=(n_steps, 6))
    v = 0.0
    speeds = np.empty(n_steps)
    imu_lines = ["t,ax,ay,az,gx,gy,gz"]
    for i in range(n_steps):
        t = i * dt
        a_cmd = (dynamics.A_max * drive_level(ACCELERATOR, t)
                 - dynamics.B_max * drive_level(BRAKE, t))
        v_next = max(0.0, v + a_cmd * dt)
        a_actual = (v_next - v) / dt
        yaw = (dynamics.yaw_gain * drive_level(STEERING, t)
               * min(1.0, v / dynamics.v_ref))
        speeds[i] = v
        v = v_next
        ax = a_actual + dynamics.accel_noise_sd * noise[i, 0]
        ay = speeds[i] * yaw + dynamics.accel_noise_sd * noise[i, 1]
        az = dynamics.gravity + dynamics.accel_noise_sd * noise[i, 2]
        gx = dynamics.gyro_noise_sd * noise[i, 3]
        gy = dynamics.gyro_noise_sd * noise[i, 4]
        gz = yaw + dynamics.gyro_noise_sd * noise[i, 5]
        imu_lines.append(f"{t:.6f},{ax:.6f},{ay:.6f},{az:.6f},{gx:.6f},{gy:.6f},{gz:.6f}")
    imu_lines.append("")

    step_times = np.arange(n_steps) * dt

    def speed_at(t: float) -> float:
        i = min(n_steps - 1, int(t / dt))
        return float(speeds[i])

    # --- CAN stream: truth messages plus decoys, merged by (t, id) ---
    records: list[tuple[float, int, str]] = []

    for control, sig in truth.signals.items():
        dbc_sig = DbcSignal(sig.name or control, sig.start_bit, sig.length,
                            sig.byte_order, signed=False)
        counter = 0
        for t in _emission_times(sig.id, sig.period, scenario.duration):
            level = can_level(control, t)
            payload = bytearray(sig.dlc)
            pack_signal(payload, dbc_sig, sig.dlc, sig.encode(level))
            if sig.pressed_bit is not None and level > 0.05:
                payload[sig.pressed_bit // 8] |= 1 << (sig.pressed_bit % 8)
            if sig.counter_byte is not None:
                payload[sig.counter_byte] = counter & 0xFF
            if sig.checksum_byte is not None:
                total = sum(b for i, b in enumerate(payload) if i != sig.checksum_byte)
                payload[sig.checksum_byte] = total & 0xFF
            counter += 1
            records.append((float(t), sig.id, payload.hex().upper()))

    for decoy in truth.decoys:
        times = _emission_times(decoy.id, decoy.period, scenario.duration)
        payloads = _decoy_payloads(decoy, times, scenario, dynamics, engine_on,
                                   can_level)
        for t, payload in zip(times, payloads):
            records.append((float(t), decoy.id, payload))

    records.sort(key=lambda r: (r[0], r[1]))
    can_lines = []
    for t, msg_id, payload_hex in records:
        id_text = f"{msg_id:08X}" if msg_id >= (1 << 11) else f"{msg_id:03X}"
        can_lines.append(f"({t:.6f}) sim0 {id_text}#{payload_hex}")
    can_lines.append("")

    annotations = [
        {"kind": m.kind, "t_start": m.t_start, "t_end": m.t_end}
        for m in sorted(scenario.maneuvers, key=lambda m: m.t_start)
    ]

    return SimulationOutput(
        can_log="\n".join(can_lines),
        imu_log="\n".join(imu_lines),
        truth_dbc=emit_truth_dbc(truth),
        annotations=annotations,
    )


def _decoy_payloads(decoy: Decoy, times: np.ndarray, scenario: Scenario,
                    dynamics: DynamicsConfig, engine_on: bool,
                    can_level: Callable[[str, float], float]) -> list[str]:
    rng = np.random.default_rng([scenario.seed, decoy.id])
    payloads = []
    if decoy.kind == "counter":
        value = 0
        for _ in times:
            payload = bytearray(decoy.dlc)
            payload[0] = (value >> 8) & 0xFF
            payload[1] = value & 0xFF
            value = (value + 1) % 65536
            payloads.append(payload.hex().upper())
    elif decoy.kind == "constant":
        pattern = bytes((0xA5, 0x01, 0xFF, 0x00, 0x42, 0x00, 0x7E, 0x33)[:decoy.dlc])
        payloads = [pattern.hex().upper()] * len(times)
    elif decoy.kind == "random_walk":
        value = 32768.0
        steps = rng.normal(0.0, 300.0, size=len(times))
        for s in steps:
            value = value + s
            value = abs(value)
            if value > 65535:
                value = 2 * 65535 - value
            raw = int(value)
            payload = bytearray(decoy.dlc)
            payload[0] = (raw >> 8) & 0xFF
            payload[1] = raw & 0xFF
            payloads.append(payload.hex().upper())
    elif decoy.kind == "engine_rpm":
        rpm = dynamics.rpm_idle if engine_on else 0.0
        counter = 0
        for i, t in enumerate(times):
            if engine_on:
                target = dynamics.rpm_idle + dynamics.rpm_gain * can_level(ACCELERATOR, float(t))
                dt_p = decoy.period if i else 0.0
                rpm += (dt_p / dynamics.rpm_tau) * (target - rpm)
            raw = max(0, min(65535, int(round(rpm * 10))))
            payload = bytearray(decoy.dlc)
            payload[0] = counter & 0xFF
            payload[6] = (raw >> 8) & 0xFF
            payload[7] = raw & 0xFF
            counter += 1
            payloads.append(payload.hex().upper())
    else:
        raise ScenarioError(f"unknown decoy kind {decoy.kind!r}")
    return payloads


def emit_truth_dbc(truth: GroundTruthMap) -> str:
    """Render the ground-truth signals as a minimal DBC document."""
    if not truth.signals:
        return ""
    lines = ['VERSION ""', ""]
    for control in CONTROLS:
        sig = truth.signals.get(control)
        if sig is None:
            continue
        message_name = sig.message_name or f"{control.capitalize()}Status"
        lines.append(f"BO_ {sig.id} {message_name}: {sig.dlc} SIM")
        order_flag = "0" if sig.byte_order == BIG_ENDIAN else "1"
        factor = 1.0 / sig.scale
        offset = -sig.offset / sig.scale
        lo, hi = sig.physical_range(control)
        lines.append(
            f" SG_ {sig.name or control} : {sig.start_bit}|{sig.length}"
            f"@{order_flag}+ ({factor:.12g},{offset:.12g}) [{lo:g}|{hi:g}] \"\" SIM")
        if sig.pressed_bit is not None:
            lines.append(
                f" SG_ {sig.pressed_name} : {sig.pressed_bit}|1@0+"
                f" (1,0) [0|1] \"\" SIM")
        lines.append("")
    return "\n".join(lines)


# --- scenario builders -----------------------------------------------------

def build_drive_scenario(events_per_control: int = 15, seed: int = 0,
                         dynamics: DynamicsConfig | None = None,
                         stationary_lead: float = 5.0) -> Scenario:
    """Interleaved accelerate/steer/brake cycles sized to keep the vehicle
    moving through every steering maneuver."""
    dynamics = dynamics if dynamics is not None else DynamicsConfig()
    rng = np.random.default_rng([seed, 0x5CE0])
    maneuvers: list[Maneuver] = []
    t = stationary_lead + 1.0
    v = 0.0
    left = True
    for _ in range(events_per_control):
        mag_a = float(rng.uniform(0.45, 0.8))
        hold_a = float(rng.uniform(2.2, 3.0))
        maneuvers.append(Maneuver(ACCELERATE, round(t, 3), round(mag_a, 3), round(hold_a, 3)))
        v += dynamics.A_max * mag_a * (hold_a - dynamics.ramp)
        t += hold_a + float(rng.uniform(1.8, 2.4))

        mag_s = float(rng.uniform(0.5, 0.9))
        hold_s = float(rng.uniform(2.2, 3.0))
        kind = STEER_LEFT if left else STEER_RIGHT
        left = not left
        maneuvers.append(Maneuver(kind, round(t, 3), round(mag_s, 3), round(hold_s, 3)))
        t += hold_s + float(rng.uniform(1.8, 2.4))

        hold_b = float(rng.uniform(2.2, 3.0))
        drop = 0.8 * v
        mag_b = drop / (dynamics.B_max * (hold_b - dynamics.ramp))
        mag_b = float(min(0.85, max(0.45, mag_b)))
        maneuvers.append(Maneuver(BRAKE_MANEUVER, round(t, 3), round(mag_b, 3), round(hold_b, 3)))
        v = max(0.0, v - dynamics.B_max * mag_b * (hold_b - dynamics.ramp))
        t += hold_b + float(rng.uniform(1.8, 2.4))
    return Scenario(duration=math.ceil(t + 3.0), stationary_lead=stationary_lead,
                    maneuvers=maneuvers, seed=seed)


def build_accelerator_scenario(events: int = 15, seed: int = 0,
                               full_press_index: int | None = None,
                               stationary_lead: float = 5.0) -> Scenario:
    """Accelerate-only drive; one maneuver is a full press (default: the
    third-from-last) so scaled live values reach 1.0."""
    rng = np.random.default_rng([seed, 0xACCE])
    if full_press_index is None:
        full_press_index = max(0, events - 3)
    maneuvers = []
    t = stationary_lead + 1.0
    for i in range(events):
        mag = 1.0 if i == full_press_index else float(rng.uniform(0.45, 0.8))
        hold = float(rng.uniform(2.2, 3.0))
        maneuvers.append(Maneuver(ACCELERATE, round(t, 3), round(mag, 3),
                                  round(hold, 3)))
        t += hold + float(rng.uniform(1.8, 2.4))
    return Scenario(duration=math.ceil(t + 3.0), stationary_lead=stationary_lead,
                    maneuvers=maneuvers, seed=seed)


def build_calibration_scenario(control: str, steps: list[tuple[float, float]],
                               seed: int = 0, stationary_lead: float = 5.0) -> Scenario:
    """One calibration maneuver per prompt step, back to back."""
    maneuvers = []
    t = stationary_lead + 1.0
    for level, hold in steps:
        if hold <= 0:
            raise ScenarioError("calibration hold must be > 0")
        maneuvers.append(Maneuver(CALIBRATE_PREFIX + control, round(t, 3),
                                  level, hold))
        t += hold
    return Scenario(duration=math.ceil(t + 3.0), stationary_lead=stationary_lead,
                    maneuvers=maneuvers, seed=seed)


# --- scenario/truth (de)serialization --------------------------------------

def scenario_to_dict(scenario: Scenario, truth: GroundTruthMap | None = None,
                     dynamics: DynamicsConfig | None = None) -> dict:
    doc = {
        "duration": scenario.duration,
        "stationary_lead": scenario.stationary_lead,
        "seed": scenario.seed,
        "maneuvers": [asdict(m) for m in scenario.maneuvers],
    }
    if truth is not None:
        doc["truth"] = {
            "signals": {c: asdict(s) for c, s in truth.signals.items()},
            "decoys": [asdict(d) for d in truth.decoys],
        }
    if dynamics is not None:
        doc["dynamics"] = asdict(dynamics)
    return doc


def scenario_from_dict(doc: dict) -> tuple[Scenario, GroundTruthMap | None,
                                           DynamicsConfig | None]:
    try:
        scenario = Scenario(
            duration=float(doc["duration"]),
            stationary_lead=float(doc.get("stationary_lead", 0.0)),
            maneuvers=[Maneuver(**m) for m in doc.get("maneuvers", [])],
            seed=int(doc.get("seed", 0)),
        )
    except (KeyError, TypeError) as e:
        raise ScenarioError(f"malformed scenario document: {e}") from None
    truth = None
    if "truth" in doc:
        truth = GroundTruthMap(
            signals={c: TruthSignal(**s) for c, s in doc["truth"].get("signals", {}).items()},
            decoys=[Decoy(**d) for d in doc["truth"].get("decoys", [])],
        )
    dynamics = DynamicsConfig(**doc["dynamics"]) if "dynamics" in doc else None
    return scenario, truth, dynamics


def load_scenario(path: str) -> tuple[Scenario, GroundTruthMap | None,
                                      DynamicsConfig | None]:
    with open(path, "r", encoding="utf-8") as fp:
        return scenario_from_dict(json.load(fp))


def save_scenario(path: str, scenario: Scenario, truth: GroundTruthMap | None = None,
                  dynamics: DynamicsConfig | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        json.dump(scenario_to_dict(scenario, truth, dynamics), fp, indent=2)
        fp.write("\n")
