"""Command-line entry points: simulate, infer, replay, calibrate, validate, serve."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import threading

from . import __version__
from .bus import MessageBus, publish_replay
from .calibration import (
    CalibrationWizard, PromptSchedule, PromptStep, VehicleProfile, calibrate,
    default_schedule, load_profile, profile_to_dict, save_profile,
)
from .canbus import ChannelStore, iter_candump, parse_channel_name
from .config import (
    SessionConfig, config_from_dict, load_config,
)
from .dbc import overlap_report, parse_dbc_min
from .errors import CanRevealError, ConfigError
from .gateway import GatewayHub, GatewayServer, TranscriptWriter
from .imu import ACCELERATOR, BRAKE, CONTROLS, STEERING
from .report import (
    build_report, export_quadrants, flat_rows, render_text, write_report,
    write_rows_csv,
)
from .session import Pipeline, run_batch
from .simulator import (
    DynamicsConfig, build_accelerator_scenario, build_calibration_scenario,
    build_drive_scenario, default_truth, load_scenario, save_scenario, simulate,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

DRIVE_PRESETS = {"drive15": 15, "drive9": 9, "negative9": 9, "negative15": 15,
                 "accel15": 15}
CAL_PRESETS = {f"cal-{c}": c for c in CONTROLS}


def _session_config(args) -> SessionConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else SessionConfig()
    overrides = {}
    for name in ("mode", "rate", "vehicle"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "lenient", False):
        overrides["strict"] = False
    if getattr(args, "speed", None) is not None:
        overrides["replay_speed"] = args.speed
    if getattr(args, "port", None) is not None:
        overrides["serve_port"] = args.port
    if overrides:
        from .config import config_to_dict

        doc = config_to_dict(cfg)
        doc.update(overrides)
        cfg = config_from_dict(doc)
    return cfg


def _load_profile_arg(args) -> VehicleProfile | None:
    path = getattr(args, "profile", None)
    if not path:
        return None
    return load_profile(path)


def _schedule_from_file(path: str) -> PromptSchedule:
    with open(path, "r", encoding="utf-8") as fp:
        doc = json.load(fp)
    return PromptSchedule(
        control=doc["control"],
        steps=[PromptStep(float(s["level"]), float(s["hold"]))
               for s in doc["steps"]],
        engine_state=doc["engine_state"],
        discard_first_step=bool(doc.get("discard_first_step", False)),
    )


def _schedule_to_dict(schedule: PromptSchedule) -> dict:
    return {
        "control": schedule.control,
        "steps": [{"level": s.level, "hold": s.hold} for s in schedule.steps],
        "engine_state": schedule.engine_state,
        "discard_first_step": schedule.discard_first_step,
    }


# --- simulate ----------------------------------------------------------------

def cmd_simulate(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    truth = default_truth()
    dynamics = DynamicsConfig()
    schedule = None
    if args.scenario:
        scenario, file_truth, file_dynamics = load_scenario(args.scenario)
        truth = file_truth if file_truth is not None else truth
        dynamics = file_dynamics if file_dynamics is not None else dynamics
        if args.seed is not None:
            scenario.seed = args.seed
    elif args.preset in DRIVE_PRESETS:
        events = args.events or DRIVE_PRESETS[args.preset]
        if args.preset == "accel15":
            scenario = build_accelerator_scenario(events=events, seed=args.seed or 0)
        else:
            scenario = build_drive_scenario(events_per_control=events,
                                            seed=args.seed or 0, dynamics=dynamics)
        if args.preset.startswith("negative"):
            truth.signals.pop(STEERING)
    elif args.preset in CAL_PRESETS:
        control = CAL_PRESETS[args.preset]
        schedule = default_schedule(control)
        scenario = build_calibration_scenario(
            control, [(s.level, s.hold) for s in schedule.steps],
            seed=args.seed or 0)
    else:
        raise ConfigError("simulate needs --scenario FILE or --preset NAME")

    out = simulate(scenario, truth, dynamics)
    with open(os.path.join(args.out, "can.log"), "w", encoding="utf-8") as fp:
        fp.write(out.can_log)
    with open(os.path.join(args.out, "imu.csv"), "w", encoding="utf-8") as fp:
        fp.write(out.imu_log)
    with open(os.path.join(args.out, "truth.dbc"), "w", encoding="utf-8") as fp:
        fp.write(out.truth_dbc)
    with open(os.path.join(args.out, "annotations.json"), "w", encoding="utf-8") as fp:
        json.dump(out.annotations, fp, indent=2)
        fp.write("\n")
    save_scenario(os.path.join(args.out, "scenario.json"), scenario, truth, dynamics)
    if schedule is not None:
        with open(os.path.join(args.out, "schedule.json"), "w", encoding="utf-8") as fp:
            json.dump(_schedule_to_dict(schedule), fp, indent=2)
            fp.write("\n")
    print(f"wrote can.log, imu.csv, truth.dbc, annotations.json to {args.out}")
    return EXIT_OK


# --- infer -------------------------------------------------------------------

def _store_from_log(path: str, strict: bool = True) -> ChannelStore:
    store = ChannelStore()
    with open(path, "r", encoding="utf-8") as fp:
        for frame in iter_candump(fp, strict=strict):
            store.ingest(frame)
    return store


def _calibration_inputs(cal_dir: str, control: str):
    base = os.path.join(cal_dir, control)
    can_path = os.path.join(base, "can.log")
    schedule_path = os.path.join(base, "schedule.json")
    annotations_path = os.path.join(base, "annotations.json")
    if not (os.path.exists(can_path) and os.path.exists(schedule_path)
            and os.path.exists(annotations_path)):
        return None
    schedule = _schedule_from_file(schedule_path)
    with open(annotations_path, "r", encoding="utf-8") as fp:
        annotations = json.load(fp)
    t0 = min(a["t_start"] for a in annotations)
    return _store_from_log(can_path), schedule, t0


def cmd_infer(args) -> int:
    cfg = _session_config(args)
    profile = _load_profile_arg(args)
    transcript = None
    listeners = []
    hub = None
    if args.transcript:
        transcript = TranscriptWriter()
        hub = GatewayHub(cfg.vehicle, profile=profile)
        transcript.record_handshake(hub)
        hub.add_sink(transcript)
        listeners.append(hub.listener())
    result = run_batch(args.can, args.imu, cfg, profile=profile,
                       listeners=listeners)
    report = build_report(result)
    write_report(report, args.out)
    print(f"wrote {args.out}")
    if args.rankings:
        write_rows_csv(flat_rows(report), args.rankings)
        print(f"wrote {args.rankings}")
    if args.text:
        print(render_text(report))
    if transcript is not None:
        transcript.write(args.transcript)
        print(f"wrote {args.transcript}")
    if args.quadrants_dir:
        os.makedirs(args.quadrants_dir, exist_ok=True)
        for control in CONTROLS:
            state = result.states[control]
            key = state.winner
            if key is None and state.rounds and state.rounds[-1].top:
                key = state.rounds[-1].top.key
            if key is None:
                log.warning("no channel to export for %s", control)
                continue
            cal = (_calibration_inputs(args.cal_dir, control)
                   if args.cal_dir else None)
            doc = export_quadrants(
                key, result.store, result.windows[control],
                result.references[control],
                calibration_store=cal[0] if cal else None,
                calibration_schedule=cal[1] if cal else None,
                calibration_t0=cal[2] if cal else None)
            path = os.path.join(args.quadrants_dir, f"{control}_quadrants.json")
            with open(path, "w", encoding="utf-8") as fp:
                json.dump(doc, fp, indent=2, sort_keys=True)
                fp.write("\n")
            print(f"wrote {path}")
    return EXIT_OK


# --- replay ------------------------------------------------------------------

def cmd_replay(args) -> int:
    cfg = _session_config(args)
    profile = _load_profile_arg(args)
    hub = GatewayHub(cfg.vehicle, profile=profile)
    pipeline = Pipeline(cfg, profile=profile, listeners=[hub.listener()])
    bus = MessageBus()
    pipeline.attach_to(bus)
    server = None
    if args.serve:
        server = GatewayServer(hub, port=cfg.serve_port).start()
        print(f"gateway listening on ws://127.0.0.1:{server.port}")
    try:
        publish_replay(bus, args.can, args.imu, speed=cfg.replay_speed,
                       strict=cfg.strict)
        pipeline.finalize()
        result = pipeline.result()
        if args.out:
            write_report(build_report(result), args.out)
            print(f"wrote {args.out}")
        for control in CONTROLS:
            state = result.states[control]
            print(f"{control}: {state.status} winner={state.winner_name}")
        if server is not None and args.linger > 0:
            threading.Event().wait(args.linger)
    finally:
        if server is not None:
            server.stop()
    return EXIT_OK


# --- calibrate ---------------------------------------------------------------

def _merge_profile(path: str, vehicle: str, control_profile) -> VehicleProfile:
    if os.path.exists(path):
        profile = load_profile(path)
        if vehicle and vehicle != "unknown":
            profile.vehicle = vehicle
    else:
        profile = VehicleProfile(vehicle=vehicle)
    profile.set_control(control_profile)
    return profile


def cmd_calibrate(args) -> int:
    schedule = (_schedule_from_file(args.schedule) if args.schedule
                else default_schedule(args.control))
    if schedule.control != args.control:
        raise ConfigError(f"schedule is for {schedule.control}, not {args.control}")
    if args.serve:
        return _calibrate_live(args, schedule)
    if args.annotations:
        with open(args.annotations, "r", encoding="utf-8") as fp:
            annotations = json.load(fp)
        marks = [a["t_start"] for a in annotations
                 if a["kind"] == f"calibrate_{args.control}"]
        if len(marks) == len(schedule.steps):
            step_times = sorted(marks)
        elif marks:
            step_times = schedule.step_times(min(marks))
        else:
            raise ConfigError("annotations contain no calibration marks")
    elif args.t0 is not None:
        step_times = schedule.step_times(args.t0)
    else:
        raise ConfigError("calibrate needs --annotations FILE or --t0 SECONDS")
    store = _store_from_log(args.can, strict=not args.lenient)
    control_profile = calibrate(store, schedule, step_times)
    if control_profile.candidates and args.choose_top:
        control_profile.chosen = control_profile.candidates[0].key
    profile = _merge_profile(args.out, args.vehicle or "unknown", control_profile)
    save_profile(profile, args.out)
    print(f"{args.control}: retained {len(control_profile.candidates)} candidates")
    for c in control_profile.candidates:
        print(f"  {c.key.name}  |r|={abs(c.r):.4f}  range=[{c.min_value}, {c.max_value}]")
    print(f"wrote {args.out}")
    return EXIT_OK


def _calibrate_live(args, schedule: PromptSchedule) -> int:
    """Wizard session over a paced replay: prompts go out over the gateway,
    operator acks advance the schedule, the profile is computed at the end."""
    cfg = _session_config(args)
    profile_box: dict = {}
    hub = GatewayHub(cfg.vehicle or "unknown")
    pipeline = Pipeline(cfg, listeners=[hub.listener()])
    bus = MessageBus()
    pipeline.attach_to(bus)
    done = threading.Event()

    def on_done(wizard: CalibrationWizard) -> None:
        control_profile = calibrate(pipeline.store, schedule, wizard.step_times)
        if control_profile.candidates and args.choose_top:
            control_profile.chosen = control_profile.candidates[0].key
        profile_box["profile"] = control_profile
        done.set()

    hub.on_wizard_done = on_done
    server = GatewayServer(hub, port=cfg.serve_port).start()
    print(f"gateway listening on ws://127.0.0.1:{server.port}")
    try:
        replay = threading.Thread(
            target=publish_replay,
            args=(bus, args.can, args.imu),
            kwargs={"speed": cfg.replay_speed, "strict": cfg.strict},
            daemon=True)
        replay.start()
        hub.start_wizard(args.control, CalibrationWizard(schedule))
        replay.join()
        pipeline.finalize()
        done.wait(timeout=5.0)
    finally:
        server.stop()
    if "profile" not in profile_box:
        print("wizard did not complete; no profile written", file=sys.stderr)
        return EXIT_RUNTIME
    profile = _merge_profile(args.out, args.vehicle or "unknown",
                             profile_box["profile"])
    save_profile(profile, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


# --- validate ------------------------------------------------------------------

def cmd_validate(args) -> int:
    with open(args.dbc, "r", encoding="utf-8") as fp:
        messages = parse_dbc_min(fp.read())
    key = parse_channel_name(args.channel)
    records = overlap_report(key, messages)
    if args.signal:
        records = [r for r in records if r["signal"] == args.signal]
        if not records:
            raise ConfigError(f"no signal named {args.signal!r} in message {key.id}")
    if args.json:
        print(json.dumps(records, indent=2, sort_keys=True))
    else:
        for r in records:
            print(f"{r['channel']}  {r['message']}.{r['signal']}: "
                  f"overlap={r['overlap_bits']} bits, coverage={r['coverage']:.2f}")
    return EXIT_OK


# --- serve ---------------------------------------------------------------------

def cmd_serve(args) -> int:
    cfg = _session_config(args)
    hub = GatewayHub(cfg.vehicle, profile=_load_profile_arg(args))
    server = GatewayServer(hub, port=cfg.serve_port).start()
    print(f"gateway listening on ws://127.0.0.1:{server.port} (no session; "
          f"awaiting a replay)")
    try:
        threading.Event().wait()  # Ctrl+C to exit
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return EXIT_OK


# --- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="canreveal",
        description="Identify accelerator, brake, and steering CAN channels "
                    "by correlating event-windowed bus traffic with inertial "
                    "measurements.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate synthetic CAN/IMU logs")
    p.add_argument("--scenario", help="scenario JSON file")
    p.add_argument("--preset", choices=sorted(DRIVE_PRESETS) + sorted(CAL_PRESETS),
                   help="built-in scenario")
    p.add_argument("--events", type=int, help="events per control for drive presets")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("infer", help="batch inference over recorded logs")
    p.add_argument("--can", required=True)
    p.add_argument("--imu", required=True)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--config")
    p.add_argument("--profile", help="calibration profile JSON")
    p.add_argument("--vehicle")
    p.add_argument("--mode", choices=["value", "derivative"])
    p.add_argument("--rate", type=float)
    p.add_argument("--rankings", help="also write flat ranking rows as CSV")
    p.add_argument("--quadrants-dir", dest="quadrants_dir")
    p.add_argument("--cal-dir", dest="cal_dir",
                   help="directory with <control>/ calibration recordings")
    p.add_argument("--transcript", help="write the gateway message stream as JSONL")
    p.add_argument("--lenient", action="store_true",
                   help="skip malformed log records instead of aborting")
    p.add_argument("--text", action="store_true", help="print ranking tables")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("replay", help="paced replay with optional gateway")
    p.add_argument("--can", required=True)
    p.add_argument("--imu", required=True)
    p.add_argument("--speed", type=float, default=1.0,
                   help="replay speed factor; 0 = unpaced")
    p.add_argument("--serve", action="store_true")
    p.add_argument("--port", type=int)
    p.add_argument("--linger", type=float, default=0.0,
                   help="keep the gateway up for N seconds after the replay ends")
    p.add_argument("--config")
    p.add_argument("--profile")
    p.add_argument("--vehicle")
    p.add_argument("--out", help="write the final report JSON")
    p.add_argument("--lenient", action="store_true")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("calibrate", help="build a per-control candidate profile")
    p.add_argument("--can", required=True)
    p.add_argument("--imu", help="needed only with --serve replay")
    p.add_argument("--control", required=True, choices=list(CONTROLS))
    p.add_argument("--annotations", help="simulator annotations JSON")
    p.add_argument("--t0", type=float, help="first prompt time in the recording")
    p.add_argument("--schedule", help="schedule JSON file (default per control)")
    p.add_argument("--out", required=True, help="profile JSON path")
    p.add_argument("--vehicle")
    p.add_argument("--choose-top", dest="choose_top", action="store_true",
                   help="mark the strongest candidate as chosen")
    p.add_argument("--serve", action="store_true",
                   help="run the wizard over the gateway while replaying")
    p.add_argument("--port", type=int)
    p.add_argument("--speed", type=float)
    p.add_argument("--config")
    p.add_argument("--lenient", action="store_true")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("validate", help="bit-overlap of a channel vs DBC signals")
    p.add_argument("--dbc", required=True)
    p.add_argument("--channel", required=True, help='e.g. "241_msb_1"')
    p.add_argument("--signal", help="restrict to one signal name")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("serve", help="gateway only, awaiting a session")
    p.add_argument("--port", type=int)
    p.add_argument("--config")
    p.add_argument("--profile")
    p.add_argument("--vehicle")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CanRevealError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
