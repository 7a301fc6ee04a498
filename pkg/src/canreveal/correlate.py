"""Event-window correlation: resampling, Pearson scoring, masking, ranking.

Channel and reference series are resampled onto a common grid inside each
event window, concatenated across all accumulated windows, and scored with a
single Pearson coefficient per channel. Ranking is by absolute correlation
with the sign retained internally, since encodings may be inverted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, CoverageError, ZeroVarianceError
from .canbus import ChannelKey, ChannelStore, channel_name
from .events import EventWindow
from .imu import ReferenceSeries

VALUE = "value"
DERIVATIVE = "derivative"
MODES = (VALUE, DERIVATIVE)


@dataclass(frozen=True)
class Grid:
    """Uniform resampling grid: points at start + k/rate, k = 0..floor((end-start)*rate)."""

    start: float
    end: float
    rate: float

    def __post_init__(self):
        if self.end <= self.start:
            raise ConfigError(f"grid end {self.end} must exceed start {self.start}")
        if self.rate <= 0:
            raise ConfigError("grid rate must be > 0")

    @property
    def points(self) -> int:
        return int(math.floor((self.end - self.start) * self.rate)) + 1

    def times(self) -> np.ndarray:
        return self.start + np.arange(self.points) / self.rate


@dataclass(frozen=True)
class ChannelScore:
    key: ChannelKey
    r: float
    n_samples: int
    n_events: int


class Mask:
    """Set of channels allowed into scoring, or the special allow-all mask."""

    def __init__(self, allowed: Iterable[ChannelKey] | None = None):
        self._allowed = None if allowed is None else frozenset(allowed)

    @classmethod
    def all(cls) -> "Mask":
        return cls(None)

    @property
    def is_all(self) -> bool:
        return self._allowed is None

    def __contains__(self, key: ChannelKey) -> bool:
        return self._allowed is None or key in self._allowed

    def keys(self) -> frozenset[ChannelKey] | None:
        return self._allowed

    def __repr__(self) -> str:
        if self._allowed is None:
            return "Mask(all)"
        return f"Mask({sorted(k.name for k in self._allowed)})"


def resample_linear(t: np.ndarray, values: np.ndarray, grid: Grid) -> np.ndarray:
    """Linear interpolation of (t, values) onto the grid points.

    The series must span the grid; exact sample values are reproduced at
    coincident timestamps.
    """
    if len(t) == 0:
        raise CoverageError("cannot resample an empty series")
    if t[0] > grid.start or t[-1] < grid.end:
        raise CoverageError(
            f"series [{t[0]:.6f}, {t[-1]:.6f}] does not span grid "
            f"[{grid.start:.6f}, {grid.end:.6f}]")
    return np.interp(grid.times(), t, values)


def rate_of_change(values: Sequence[float], dt: float) -> np.ndarray:
    """Forward differences (v[i+1] - v[i]) / dt; length n-1."""
    if len(values) < 2:
        raise ValueError("rate_of_change needs at least 2 points")
    if dt <= 0:
        raise ConfigError("dt must be > 0")
    return np.diff(np.asarray(values, dtype=float)) / dt


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Standard Pearson correlation coefficient.

    Raises ZeroVarianceError when either input is constant, so callers can
    exclude the channel rather than report a spurious value.
    """
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape:
        raise ValueError(f"length mismatch: {xa.shape} vs {ya.shape}")
    if xa.size < 2:
        raise ValueError("pearson needs at least 2 points")
    xd = xa - xa.mean()
    yd = ya - ya.mean()
    sx = float(np.dot(xd, xd))
    sy = float(np.dot(yd, yd))
    if sx == 0.0 or sy == 0.0:
        raise ZeroVarianceError("correlation undefined for constant input")
    r = float(np.dot(xd, yd)) / math.sqrt(sx * sy)
    return max(-1.0, min(1.0, r))


def _window_grid(window: EventWindow, rate: float) -> Grid:
    return Grid(window.w_start, window.w_end, rate)


def score_channels(store: ChannelStore, ref: ReferenceSeries,
                   windows: Sequence[EventWindow], mask: Mask,
                   mode: str = VALUE, rate: float = 20.0,
                   diagnostics: dict | None = None) -> list[ChannelScore]:
    """Correlate every masked channel against the reference across all windows.

    Each channel observed in every window is resampled per window, the
    segments are concatenated in window order (derivatives, when requested,
    are taken per segment so differences never straddle window boundaries),
    and one Pearson value is computed over the concatenation. Channels with
    missing window coverage or zero variance are excluded.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown correlation mode {mode!r}")
    if not windows:
        raise ValueError("score_channels requires at least one window")
    grids = [_window_grid(w, rate) for w in windows]

    ref_segments = []
    for grid in grids:
        rt, rv = ref.covering(grid.start, grid.end)
        ref_segments.append(resample_linear(rt, rv, grid))
    if mode == DERIVATIVE:
        ref_segments = [rate_of_change(seg, 1.0 / rate) for seg in ref_segments]
    ref_concat = np.concatenate(ref_segments)

    excluded_coverage = 0
    excluded_variance = 0
    scores: list[ChannelScore] = []
    for key in store.keys():
        if key not in mask:
            continue
        segments = []
        covered = True
        for grid in grids:
            ct, cv = store.covering(key, grid.start, grid.end)
            if len(ct) == 0 or ct[0] > grid.start or ct[-1] < grid.end:
                covered = False
                break
            segments.append(resample_linear(ct, cv, grid))
        if not covered:
            excluded_coverage += 1
            continue
        if mode == DERIVATIVE:
            segments = [rate_of_change(seg, 1.0 / rate) for seg in segments]
        concat = np.concatenate(segments)
        try:
            r = pearson(concat, ref_concat)
        except ZeroVarianceError:
            excluded_variance += 1
            continue
        scores.append(ChannelScore(key=key, r=r, n_samples=len(concat),
                                   n_events=len(windows)))
    if diagnostics is not None:
        diagnostics["excluded_coverage"] = excluded_coverage
        diagnostics["excluded_variance"] = excluded_variance
    return scores


def rank(scores: Iterable[ChannelScore], top_n: int) -> list[ChannelScore]:
    """Sort by |r| descending, ties by canonical channel name, keep top_n."""
    if top_n < 1:
        raise ConfigError("top_n must be >= 1")
    ordered = sorted(scores, key=lambda s: (-abs(s.r), channel_name(s.key)))
    return ordered[:top_n]


def liveliness_mask(store: ChannelStore, horizon: float,
                    exclude_counters: bool = True,
                    counter_fraction: float = 0.99) -> Mask:
    """Mask of channels that moved over the horizon.

    Constant channels are excluded; with the counter filter on, channels whose
    successive deltas repeat a single nonzero value in >= counter_fraction of
    steps are excluded as free-running counters.
    """
    end = store.last_t
    if end is None:
        return Mask(())
    allowed = []
    for key in store.keys():
        _, values = store.query(key, end - horizon, end)
        if len(values) < 2:
            continue
        deltas = np.diff(values)
        if not np.any(deltas):
            continue  # constant over the horizon
        if exclude_counters:
            uniq, counts = np.unique(deltas, return_counts=True)
            top = int(np.argmax(counts))
            if uniq[top] != 0 and counts[top] / len(deltas) >= counter_fraction:
                continue
        allowed.append(key)
    return Mask(allowed)
