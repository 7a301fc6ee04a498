"""Guided calibration: prompt schedules, expected actuation templates,
channel-vs-template correlation, and persisted vehicle profiles.

Pedal calibration runs engine-off so engine traffic is flat and drops out of
the candidate set; steering keeps the engine running for power assist. Brake
schedules start with one discarded full press because line pressure changes
the pedal travel of later presses.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .errors import ConfigError, ProfileError
from .canbus import ChannelKey, ChannelStore, channel_name, parse_channel_name
from .correlate import Mask, pearson
from .errors import ZeroVarianceError
from .imu import ACCELERATOR, BRAKE, CONTROLS, STEERING, ReferenceSeries

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

ENGINE_OFF = "off"
ENGINE_RUNNING = "running"


@dataclass(frozen=True)
class PromptStep:
    level: float
    hold: float


@dataclass
class PromptSchedule:
    control: str
    steps: list[PromptStep]
    engine_state: str
    discard_first_step: bool = False

    def __post_init__(self):
        if self.control not in CONTROLS:
            raise ConfigError(f"unknown control {self.control!r}")
        if not self.steps:
            raise ConfigError("schedule needs at least one step")
        lo = -1.0 if self.control == STEERING else 0.0
        for step in self.steps:
            if step.hold <= 0:
                raise ConfigError("step holds must be > 0")
            if not lo <= step.level <= 1.0:
                raise ConfigError(f"level {step.level} out of [{lo}, 1]")
        expected = ENGINE_RUNNING if self.control == STEERING else ENGINE_OFF
        if self.engine_state != expected:
            raise ConfigError(
                f"{self.control} calibration requires engine {expected}")

    @property
    def total_duration(self) -> float:
        return sum(s.hold for s in self.steps)

    def step_times(self, t0: float) -> list[float]:
        """Nominal start time of each step when run back to back from t0."""
        times = []
        t = t0
        for step in self.steps:
            times.append(t)
            t += step.hold
        return times


def default_schedule(control: str) -> PromptSchedule:
    """Mixed-magnitude hold sequences; non-monotone so slow ramps (counters,
    temperature-like signals) cannot mimic the pattern."""
    if control == ACCELERATOR:
        steps = [(0.0, 3.0), (0.5, 3.0), (1.0, 3.0), (0.25, 3.0), (0.75, 3.0), (0.0, 3.0)]
        return PromptSchedule(control, [PromptStep(*s) for s in steps], ENGINE_OFF)
    if control == BRAKE:
        steps = [(1.0, 3.0),  # discarded: brake-line pressure settles
                 (0.0, 3.0), (0.66, 3.0), (0.33, 3.0), (1.0, 3.0), (0.0, 3.0)]
        return PromptSchedule(control, [PromptStep(*s) for s in steps], ENGINE_OFF,
                              discard_first_step=True)
    if control == STEERING:
        steps = [(0.0, 3.0), (-0.5, 3.0), (0.5, 3.0), (-1.0, 3.0), (1.0, 3.0), (0.0, 3.0)]
        return PromptSchedule(control, [PromptStep(*s) for s in steps], ENGINE_RUNNING)
    raise ConfigError(f"unknown control {control!r}")


def template(schedule: PromptSchedule, t0: float, rate: float = 20.0) -> ReferenceSeries:
    """Piecewise-constant expected actuation waveform sampled at `rate`."""
    if rate <= 0:
        raise ConfigError("template rate must be > 0")
    series = ReferenceSeries(schedule.control)
    total = schedule.total_duration
    boundaries = schedule.step_times(t0)
    step_i = 0
    n = int(np.floor(total * rate))
    for k in range(n):
        t = t0 + k / rate
        while (step_i + 1 < len(boundaries)
               and t >= boundaries[step_i + 1]):
            step_i += 1
        series.append(t, schedule.steps[step_i].level)
    return series


@dataclass(frozen=True)
class Candidate:
    key: ChannelKey
    r: float
    min_value: int
    max_value: int


@dataclass
class CalibrationProfile:
    control: str
    candidates: list[Candidate] = field(default_factory=list)
    chosen: ChannelKey | None = None

    def mask(self) -> Mask:
        return Mask(c.key for c in self.candidates)

    def range_for(self, key: ChannelKey) -> tuple[int, int] | None:
        for c in self.candidates:
            if c.key == key:
                return c.min_value, c.max_value
        return None


def calibrate(store: ChannelStore, schedule: PromptSchedule,
              step_times: list[float], rate: float = 20.0,
              r_keep: float = 0.7, cap: int = 10,
              slack: float = 0.5) -> CalibrationProfile:
    """Correlate every observed channel against the schedule template.

    step_times gives the actual start of each prompt step (wizard-ack or
    annotation derived). `slack` seconds around each step boundary are
    excluded from the comparison to absorb operator latency; per-candidate
    value ranges come from raw samples in the central half of each hold.
    """
    if len(step_times) != len(schedule.steps):
        raise ConfigError(f"{len(step_times)} step times for "
                          f"{len(schedule.steps)} schedule steps")
    kept = [(step, t) for i, (step, t) in enumerate(zip(schedule.steps, step_times))
            if not (schedule.discard_first_step and i == 0)]

    grid_t: list[float] = []
    grid_level: list[float] = []
    plateau_spans: list[tuple[float, float]] = []
    for step, t_start in kept:
        interior = (t_start + slack, t_start + step.hold - slack)
        if interior[1] <= interior[0]:
            raise ConfigError(f"hold {step.hold} too short for slack {slack}")
        n = int(np.floor((interior[1] - interior[0]) * rate)) + 1
        for k in range(n):
            grid_t.append(interior[0] + k / rate)
            grid_level.append(step.level)
        quarter = step.hold / 4
        plateau_spans.append((t_start + quarter, t_start + step.hold - quarter))
    grid_t_arr = np.asarray(grid_t)
    grid_level_arr = np.asarray(grid_level)

    candidates: list[Candidate] = []
    for key in store.keys():
        ct, cv = store.covering(key, grid_t_arr[0], grid_t_arr[-1])
        if len(ct) == 0 or ct[0] > grid_t_arr[0] or ct[-1] < grid_t_arr[-1]:
            continue
        resampled = np.interp(grid_t_arr, ct, cv)
        try:
            r = pearson(resampled, grid_level_arr)
        except ZeroVarianceError:
            continue
        if abs(r) < r_keep:
            continue
        plateau_values: list[float] = []
        for a, b in plateau_spans:
            _, vals = store.query(key, a, b)
            plateau_values.extend(vals.tolist())
        if not plateau_values:
            continue
        candidates.append(Candidate(key=key, r=r,
                                    min_value=int(min(plateau_values)),
                                    max_value=int(max(plateau_values))))
    candidates.sort(key=lambda c: (-abs(c.r), channel_name(c.key)))
    candidates = candidates[:cap]
    if not candidates:
        log.warning("calibration for %s retained no channels at |r| >= %.2f; "
                    "inference will fall back to the liveliness mask",
                    schedule.control, r_keep)
    return CalibrationProfile(control=schedule.control, candidates=candidates)


@dataclass
class VehicleProfile:
    vehicle: str
    created: str = ""
    controls: dict[str, CalibrationProfile] = field(default_factory=dict)

    def __post_init__(self):
        if not self.created:
            self.created = datetime.now(timezone.utc).isoformat(timespec="seconds")

    def set_control(self, profile: CalibrationProfile) -> None:
        self.controls[profile.control] = profile


def profile_to_dict(profile: VehicleProfile) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "vehicle": profile.vehicle,
        "created": profile.created,
        "controls": {
            control: {
                "candidates": [
                    {"id": c.key.id, "order": c.key.order,
                     "start_byte": c.key.start_byte, "r": c.r,
                     "min": c.min_value, "max": c.max_value}
                    for c in cp.candidates
                ],
                "chosen": channel_name(cp.chosen) if cp.chosen else None,
            }
            for control, cp in profile.controls.items()
        },
    }


def profile_from_dict(doc: dict) -> VehicleProfile:
    if not isinstance(doc, dict):
        raise ProfileError("profile document is not an object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ProfileError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    for required in ("vehicle", "created", "controls"):
        if required not in doc:
            raise ProfileError(f"missing field {required!r}")
    profile = VehicleProfile(vehicle=doc["vehicle"], created=doc["created"])
    for control, body in doc["controls"].items():
        if control not in CONTROLS:
            raise ProfileError(f"unknown control {control!r}")
        candidates = []
        for i, c in enumerate(body.get("candidates", [])):
            try:
                key = ChannelKey(int(c["id"]), c["order"], int(c["start_byte"]))
                candidate = Candidate(key=key, r=float(c["r"]),
                                      min_value=int(c["min"]), max_value=int(c["max"]))
            except (KeyError, TypeError, ValueError) as e:
                raise ProfileError(
                    f"controls.{control}.candidates[{i}]: {e}") from None
            if candidate.min_value > candidate.max_value:
                raise ProfileError(
                    f"controls.{control}.candidates[{i}]: min exceeds max")
            candidates.append(candidate)
        chosen = body.get("chosen")
        profile.set_control(CalibrationProfile(
            control=control, candidates=candidates,
            chosen=parse_channel_name(chosen) if chosen else None))
    return profile


def save_profile(profile: VehicleProfile, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        json.dump(profile_to_dict(profile), fp, indent=2, sort_keys=True)
        fp.write("\n")


def load_profile(path: str) -> VehicleProfile:
    with open(path, "r", encoding="utf-8") as fp:
        try:
            doc = json.load(fp)
        except json.JSONDecodeError as e:
            raise ProfileError(f"not a JSON document: {e}") from None
    return profile_from_dict(doc)


class CalibrationWizard:
    """Sequential prompt state machine advanced by operator acknowledgements.

    Each prompt's display time is taken as its step start; the boundary slack
    in calibrate() absorbs operator reaction latency.
    """

    IDLE = "idle"
    PROMPTING = "prompting"
    DONE = "done"
    ABORTED = "aborted"

    def __init__(self, schedule: PromptSchedule):
        self.schedule = schedule
        self.state = self.IDLE
        self.step_index = -1
        self.step_times: list[float] = []

    @property
    def current_step(self) -> PromptStep | None:
        if self.state != self.PROMPTING:
            return None
        return self.schedule.steps[self.step_index]

    def start(self, t: float) -> PromptStep:
        if self.state != self.IDLE:
            raise ConfigError(f"wizard already {self.state}")
        self.state = self.PROMPTING
        self.step_index = 0
        self.step_times = [t]
        return self.schedule.steps[0]

    def ack(self, step_index: int, t: float) -> PromptStep | None:
        """Acknowledge the current step; returns the next prompt or None."""
        if self.state != self.PROMPTING:
            raise ConfigError(f"ack in state {self.state}")
        if step_index != self.step_index:
            raise ConfigError(f"ack for step {step_index}, expected {self.step_index}")
        if self.step_index + 1 >= len(self.schedule.steps):
            self.state = self.DONE
            return None
        self.step_index += 1
        self.step_times.append(t)
        return self.schedule.steps[self.step_index]

    def abort(self) -> None:
        if self.state == self.PROMPTING:
            self.state = self.ABORTED

    @property
    def finished(self) -> bool:
        return self.state == self.DONE
