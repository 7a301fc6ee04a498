"""Report documents, ranking tables, and four-quadrant validation exports.

Ranked correlations are reported as absolute values (sign is kept internally;
encodings may be inverted). A control that never converged renders its winner
row as "N/A" in both the flat table and the text rendering.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np

from .calibration import PromptSchedule, template
from .canbus import ChannelKey, ChannelStore, channel_name
from .discovery import DiscoveryState, NOT_IDENTIFIED
from .errors import DomainError
from .events import EventWindow
from .imu import CONTROLS, ReferenceSeries
from .session import SessionResult


def _entry_dict(entry) -> dict:
    return {
        "id": entry.key.id,
        "channel": f"{entry.key.order}_{entry.key.start_byte}",
        "correlation": abs(entry.r),
    }


def state_to_dict(state: DiscoveryState) -> dict:
    return {
        "rounds": [
            {
                "round": r.round_index,
                "events_seen": r.events_seen,
                "elapsed_s": round(r.elapsed_s, 3),
                "entries": [_entry_dict(e) for e in r.entries],
            }
            for r in state.rounds
        ],
        "status": state.status,
        "winner": channel_name(state.winner) if state.winner else None,
    }


def build_report(result: SessionResult) -> dict:
    return {
        "vehicle": result.vehicle,
        "controls": {c: state_to_dict(result.states[c]) for c in CONTROLS},
    }


def write_report(report: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        json.dump(report, fp, indent=2, sort_keys=True)
        fp.write("\n")


def flat_rows(report: dict) -> list[dict]:
    """One record per ranking entry: round, control, elapsed_s, id, channel,
    correlation. Empty rounds yield a single N/A record."""
    rows = []
    for control, body in report["controls"].items():
        for rnd in body["rounds"]:
            if not rnd["entries"]:
                rows.append({"round": rnd["round"], "control": control,
                             "elapsed_s": rnd["elapsed_s"], "id": "N/A",
                             "channel": "N/A", "correlation": "N/A"})
                continue
            for e in rnd["entries"]:
                rows.append({"round": rnd["round"], "control": control,
                             "elapsed_s": rnd["elapsed_s"], "id": e["id"],
                             "channel": e["channel"],
                             "correlation": e["correlation"]})
    return rows


def write_rows_csv(rows: list[dict], path: str) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fp:
        writer = csv.DictWriter(fp, fieldnames=["round", "control", "elapsed_s",
                                                "id", "channel", "correlation"])
        writer.writeheader()
        writer.writerows(rows)


_EVENT_WORDS = {3: "Three", 6: "Six", 9: "Nine", 12: "Twelve", 15: "Fifteen"}


def render_text(report: dict) -> str:
    """Human-readable per-round tables in the style of the result listings."""
    lines = [f"vehicle: {report['vehicle']}", ""]
    for control, body in report["controls"].items():
        lines.append(f"== {control} ==")
        for rnd in body["rounds"]:
            events = rnd["events_seen"]
            label = _EVENT_WORDS.get(events, str(events))
            lines.append(f"{label} Events ({rnd['elapsed_s']:.0f} sec)")
            lines.append(f"{'ID':>10}  {'Channel':<8}  Correlation")
            if not rnd["entries"]:
                lines.append(f"{'N/A':>10}  {'N/A':<8}  N/A")
            for e in rnd["entries"]:
                lines.append(f"{e['id']:>10}  {e['channel']:<8}  "
                             f"{e['correlation']:.7f}")
            lines.append("")
        winner = body["winner"] if body["winner"] else "N/A"
        lines.append(f"status: {body['status']}   winner: {winner}")
        lines.append("")
    return "\n".join(lines)


# --- four-quadrant validation export ---------------------------------------

def _series_payload(t: np.ndarray, v: np.ndarray) -> dict:
    return {"t": [round(float(x), 6) for x in t],
            "values": [round(float(x), 6) for x in v]}


def export_quadrants(key: ChannelKey, store: ChannelStore,
                     windows: list[EventWindow], ref: ReferenceSeries,
                     calibration_store: ChannelStore | None = None,
                     calibration_schedule: PromptSchedule | None = None,
                     calibration_t0: float | None = None,
                     scale_ratio_limit: float = 100.0) -> dict:
    """Four labelled series for one channel.

    1: the channel during the calibration recording (empty + flagged when no
    calibration data is supplied). 2: the expected actuation template.
    3: the channel inside each detected event window. 4: the channel overlaid
    with the inertial reference over the full recording, channel omitted when
    the magnitude scales differ by more than scale_ratio_limit.
    """
    drive_t, drive_v = store.query(key, float("-inf"), float("inf"))
    if len(drive_t) == 0:
        raise DomainError(f"channel {channel_name(key)} absent from the recording")

    calibration: dict[str, Any] = {"available": False, "t": [], "values": []}
    expected: dict[str, Any] = {"t": [], "values": []}
    if calibration_store is not None and calibration_schedule is not None \
            and calibration_t0 is not None:
        cal_t, cal_v = calibration_store.query(key, float("-inf"), float("inf"))
        if len(cal_t):
            calibration = {"available": True, **_series_payload(cal_t, cal_v)}
        tpl = template(calibration_schedule, calibration_t0)
        expected = _series_payload(np.asarray(tpl.t), np.asarray(tpl.values))

    segments = []
    for win in windows:
        seg_t, seg_v = store.query(key, win.w_start, win.w_end)
        segments.append(_series_payload(seg_t, seg_v))

    ref_t = np.asarray(ref.t)
    ref_v = np.asarray(ref.values)
    chan_span = float(np.ptp(drive_v)) if len(drive_v) else 0.0
    ref_span = float(np.ptp(ref_v)) if len(ref_v) else 0.0
    reference_only = False
    if ref_span == 0.0 or chan_span == 0.0:
        reference_only = chan_span == 0.0
    else:
        ratio = chan_span / ref_span
        reference_only = ratio > scale_ratio_limit or ratio < 1.0 / scale_ratio_limit
    overlay = {
        "reference": _series_payload(ref_t, ref_v),
        "channel": None if reference_only else _series_payload(drive_t, drive_v),
        "reference_only": reference_only,
    }
    return {
        "channel": channel_name(key),
        "quadrants": {
            "calibration": calibration,
            "template": expected,
            "events": {"segments": segments},
            "overlay": overlay,
        },
    }


def not_identified_controls(report: dict) -> list[str]:
    return [c for c, body in report["controls"].items()
            if body["status"] == NOT_IDENTIFIED]
