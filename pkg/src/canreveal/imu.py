"""IMU sample model, CSV log parsing, debias/smoothing, and reference signals.

The inertial stream is reduced to one scalar reference series per control:
forward acceleration for the accelerator, its negation for the brake, and
the yaw rate for steering.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, TextIO

import numpy as np

from .errors import ConfigError, ParseError

ACCELERATOR = "accelerator"
BRAKE = "brake"
STEERING = "steering"
CONTROLS = (ACCELERATOR, BRAKE, STEERING)


@dataclass(frozen=True)
class ImuSample:
    t: float
    accel: tuple[float, float, float]  # m/s^2
    gyro: tuple[float, float, float]   # rad/s


@dataclass(frozen=True)
class AxisMap:
    """Mounting orientation: which sensor axes carry forward accel and yaw rate."""

    forward_axis: int = 0
    forward_sign: int = 1
    yaw_axis: int = 2
    yaw_sign: int = 1
    lateral_axis: int = 1  # used only by the lateral-accel steering source
    lateral_sign: int = 1

    def __post_init__(self):
        if any(a not in (0, 1, 2) for a in
               (self.forward_axis, self.yaw_axis, self.lateral_axis)):
            raise ConfigError("axis indices must be 0..2")
        if any(s not in (-1, 1) for s in
               (self.forward_sign, self.yaw_sign, self.lateral_sign)):
            raise ConfigError("axis signs must be +1 or -1")


@dataclass
class ReferenceSeries:
    """Per-control scalar reference: m/s^2 for pedals, rad/s for steering."""

    control: str
    t: list[float] = field(default_factory=list)
    values: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.t, self.values))

    def append(self, t: float, value: float) -> None:
        if self.t and t <= self.t[-1]:
            raise ValueError(f"timestamps must strictly increase ({t} after {self.t[-1]})")
        self.t.append(t)
        self.values.append(value)

    def covering(self, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
        """Samples spanning [a, b] with bracketing neighbours when available."""
        lo = bisect.bisect_left(self.t, a)
        if lo > 0:
            lo -= 1
        hi = bisect.bisect_right(self.t, b)
        if hi < len(self.t):
            hi += 1
        return (np.asarray(self.t[lo:hi], dtype=float),
                np.asarray(self.values[lo:hi], dtype=float))

    def covers(self, a: float, b: float) -> bool:
        return bool(self.t) and self.t[0] <= a and self.t[-1] >= b


def parse_imu_line(line: str, line_no: int | None = None) -> ImuSample:
    """Parse a CSV record "t,ax,ay,az,gx,gy,gz" (SI units)."""
    parts = line.strip().split(",")
    if len(parts) != 7:
        raise ParseError(f"expected 7 fields, got {len(parts)}", line_no)
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ParseError(f"non-numeric field in {line.strip()!r}", line_no) from None
    if not all(math.isfinite(v) for v in vals):
        raise ParseError(f"non-finite value in {line.strip()!r}", line_no)
    return ImuSample(t=vals[0], accel=(vals[1], vals[2], vals[3]),
                     gyro=(vals[4], vals[5], vals[6]))


def iter_imu_log(fp: TextIO, strict: bool = True,
                 skipped: list[int] | None = None) -> Iterator[ImuSample]:
    """Yield samples from an IMU CSV log; a non-numeric first line is a header."""
    for line_no, line in enumerate(fp, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        try:
            yield parse_imu_line(stripped, line_no)
        except ParseError:
            if line_no == 1:  # header row
                continue
            if strict:
                raise
            if skipped is not None:
                skipped.append(line_no)


class DebiasSmoother:
    """Streaming bias removal plus centered moving-average smoothing.

    Bias per axis is the mean over the first `bias_window` seconds and is
    subtracted from every sample, including the initial ones. Smoothing is a
    centered moving average of width `smooth_window` (window edges inclusive);
    output timestamps equal input timestamps, so emission lags by half the
    window until flush. Edge windows are truncated, never padded.
    """

    def __init__(self, bias_window: float = 3.0, smooth_window: float = 0.25):
        if bias_window < 0:
            raise ConfigError("bias_window must be >= 0")
        if smooth_window <= 0:
            raise ConfigError("smooth_window must be > 0")
        self.bias_window = bias_window
        self.smooth_window = smooth_window
        self._bias: np.ndarray | None = None
        self._pending: list[ImuSample] = []  # awaiting bias estimation
        # debiased samples kept as (t, 6-vector); sliding-window running sum
        self._t: list[float] = []
        self._rows: list[np.ndarray] = []
        self._emit = 0  # index of next center to emit
        self._win_sum = np.zeros(6)
        self._win_lo = 0  # window [_win_lo, _win_hi) currently in _win_sum
        self._win_hi = 0
        self._t0: float | None = None

    def _estimate_bias(self) -> None:
        if not self._pending:
            raise ConfigError("empty bias window: no samples before bias_window elapsed")
        rows = np.array([p.accel + p.gyro for p in self._pending])
        self._bias = rows.mean(axis=0)
        for p in self._pending:
            self._t.append(p.t)
            self._rows.append(np.array(p.accel + p.gyro) - self._bias)
        self._pending.clear()

    def feed(self, sample: ImuSample) -> list[ImuSample]:
        """Push one sample; return any smoothed samples now complete."""
        if self._t0 is None:
            self._t0 = sample.t
        if self._bias is None:
            self._pending.append(sample)
            if sample.t - self._t0 < self.bias_window:
                return []
            self._estimate_bias()
        else:
            self._t.append(sample.t)
            self._rows.append(np.array(sample.accel + sample.gyro) - self._bias)
        return self._drain(sample.t)

    def _drain(self, now: float) -> list[ImuSample]:
        half = self.smooth_window / 2
        out = []
        while self._emit < len(self._t) and self._t[self._emit] + half <= now:
            out.append(self._smooth_at(self._emit))
            self._emit += 1
        self._compact()
        return out

    def _smooth_at(self, i: int) -> ImuSample:
        half = self.smooth_window / 2
        tc = self._t[i]
        while self._win_lo < len(self._t) and self._t[self._win_lo] < tc - half:
            if self._win_lo < self._win_hi:
                self._win_sum -= self._rows[self._win_lo]
            self._win_lo += 1
        if self._win_hi < self._win_lo:
            self._win_hi = self._win_lo
            self._win_sum[:] = 0.0
        while self._win_hi < len(self._t) and self._t[self._win_hi] <= tc + half:
            self._win_sum += self._rows[self._win_hi]
            self._win_hi += 1
        n = self._win_hi - self._win_lo
        mean = self._win_sum / n
        return ImuSample(tc, (mean[0], mean[1], mean[2]), (mean[3], mean[4], mean[5]))

    def _compact(self) -> None:
        drop = min(self._emit, self._win_lo)
        if drop > 4096:
            del self._t[:drop]
            del self._rows[:drop]
            self._emit -= drop
            self._win_lo -= drop
            self._win_hi -= drop

    @property
    def started(self) -> bool:
        return self._t0 is not None

    def flush(self) -> list[ImuSample]:
        """Emit the remaining samples with edge-truncated windows."""
        if self._bias is None:
            self._estimate_bias()
        out = []
        while self._emit < len(self._t):
            out.append(self._smooth_at(self._emit))
            self._emit += 1
        return out


def debias_smooth(samples: Iterable[ImuSample], bias_window: float = 3.0,
                  smooth_window: float = 0.25) -> list[ImuSample]:
    """Batch form of DebiasSmoother over a full sample list."""
    sm = DebiasSmoother(bias_window, smooth_window)
    out: list[ImuSample] = []
    for s in samples:
        out.extend(sm.feed(s))
    out.extend(sm.flush())
    return out


def reference_value(control: str, sample: ImuSample, axis_map: AxisMap,
                    steering_source: str = "yaw_rate") -> float:
    """Scalar reference for one debiased sample.

    Accelerator: forward acceleration. Brake: its negation, so braking reads
    positive. Steering: signed yaw rate by default; lateral acceleration when
    steering_source="lateral_accel".
    """
    if control == ACCELERATOR:
        return axis_map.forward_sign * sample.accel[axis_map.forward_axis]
    if control == BRAKE:
        return -axis_map.forward_sign * sample.accel[axis_map.forward_axis]
    if control == STEERING:
        if steering_source == "lateral_accel":
            return axis_map.lateral_sign * sample.accel[axis_map.lateral_axis]
        return axis_map.yaw_sign * sample.gyro[axis_map.yaw_axis]
    raise ConfigError(f"unknown control {control!r}")


def reference(control: str, samples: Iterable[ImuSample],
              axis_map: AxisMap = AxisMap(),
              steering_source: str = "yaw_rate") -> ReferenceSeries:
    """Build the full reference series for one control from debiased samples."""
    series = ReferenceSeries(control)
    for s in samples:
        series.append(s.t, reference_value(control, s, axis_map, steering_source))
    return series
