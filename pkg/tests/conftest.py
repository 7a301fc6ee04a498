"""Shared fixtures: simulated recordings generated once per session."""

import os

import pytest

from canreveal.simulator import (
    build_calibration_scenario, build_drive_scenario, default_truth, simulate,
)
from canreveal.calibration import default_schedule
from canreveal.imu import BRAKE, CONTROLS, STEERING


def _write(out, directory):
    os.makedirs(directory, exist_ok=True)
    paths = {}
    for name, text in (("can.log", out.can_log), ("imu.csv", out.imu_log),
                       ("truth.dbc", out.truth_dbc)):
        p = os.path.join(directory, name)
        with open(p, "w", encoding="utf-8") as fp:
            fp.write(text)
        paths[name] = p
    import json

    p = os.path.join(directory, "annotations.json")
    with open(p, "w", encoding="utf-8") as fp:
        json.dump(out.annotations, fp)
    paths["annotations.json"] = p
    return paths


@pytest.fixture(scope="session")
def drive9(tmp_path_factory):
    """9-event drive recording with the default truth map, seed 1."""
    scenario = build_drive_scenario(events_per_control=9, seed=1)
    out = simulate(scenario, default_truth())
    d = tmp_path_factory.mktemp("drive9")
    paths = _write(out, str(d))
    paths["scenario"] = scenario
    return paths


@pytest.fixture(scope="session")
def calibration_recordings(tmp_path_factory):
    """Per-control calibration recordings from the default schedules."""
    root = tmp_path_factory.mktemp("cal")
    result = {}
    for control in CONTROLS:
        schedule = default_schedule(control)
        scenario = build_calibration_scenario(
            control, [(s.level, s.hold) for s in schedule.steps], seed=2)
        out = simulate(scenario, default_truth())
        d = os.path.join(str(root), control)
        paths = _write(out, d)
        paths["schedule"] = schedule
        paths["scenario"] = scenario
        paths["dir"] = d
        result[control] = paths
    result["root"] = str(root)
    return result
