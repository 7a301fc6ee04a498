"""Session configuration: one document aggregating every stage's parameters."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
import json

from .errors import ConfigError
from .correlate import MODES, VALUE
from .discovery import DiscoveryConfig
from .events import DetectorConfig, default_detector_config
from .imu import ACCELERATOR, BRAKE, CONTROLS, STEERING, AxisMap

YAW_RATE = "yaw_rate"
LATERAL_ACCEL = "lateral_accel"


@dataclass
class SessionConfig:
    detectors: dict[str, DetectorConfig] = field(default_factory=lambda: {
        c: default_detector_config(c) for c in CONTROLS})
    discovery: DiscoveryConfig = field(default_factory=DiscoveryConfig)
    mode: str = VALUE
    rate: float = 20.0
    axis_map: AxisMap = field(default_factory=AxisMap)
    steering_source: str = YAW_RATE
    bias_window: float = 3.0
    smooth_window: float = 0.25
    horizon: float = 600.0
    exclude_counters: bool = True
    profile_path: str | None = None
    replay_speed: float = 0.0
    serve_port: int = 8765
    vehicle: str = "unknown"
    strict: bool = True

    def __post_init__(self):
        if set(self.detectors) != set(CONTROLS):
            raise ConfigError("detector configs required for all three controls")
        if self.mode not in MODES:
            raise ConfigError(f"unknown correlation mode {self.mode!r}")
        if self.steering_source not in (YAW_RATE, LATERAL_ACCEL):
            raise ConfigError(f"unknown steering source {self.steering_source!r}")
        if self.rate <= 0 or self.horizon <= 0 or self.smooth_window <= 0:
            raise ConfigError("rate, horizon, and smooth_window must be > 0")
        if self.replay_speed < 0:
            raise ConfigError("replay_speed must be >= 0")


def config_to_dict(cfg: SessionConfig) -> dict:
    return {
        "detectors": {c: asdict(d) for c, d in cfg.detectors.items()},
        "discovery": asdict(cfg.discovery),
        "mode": cfg.mode,
        "rate": cfg.rate,
        "axis_map": asdict(cfg.axis_map),
        "steering_source": cfg.steering_source,
        "bias_window": cfg.bias_window,
        "smooth_window": cfg.smooth_window,
        "horizon": cfg.horizon,
        "exclude_counters": cfg.exclude_counters,
        "profile_path": cfg.profile_path,
        "replay_speed": cfg.replay_speed,
        "serve_port": cfg.serve_port,
        "vehicle": cfg.vehicle,
        "strict": cfg.strict,
    }


def config_from_dict(doc: dict) -> SessionConfig:
    cfg = SessionConfig()
    try:
        detectors = dict(cfg.detectors)
        for control, body in doc.get("detectors", {}).items():
            if control not in CONTROLS:
                raise ConfigError(f"unknown control {control!r} in detectors")
            detectors[control] = DetectorConfig(**body)
        kwargs = {
            "detectors": detectors,
            "discovery": (DiscoveryConfig(**doc["discovery"])
                          if "discovery" in doc else cfg.discovery),
            "axis_map": (AxisMap(**doc["axis_map"])
                         if "axis_map" in doc else cfg.axis_map),
        }
        for name in ("mode", "rate", "steering_source", "bias_window",
                     "smooth_window", "horizon", "exclude_counters",
                     "profile_path", "replay_speed", "serve_port", "vehicle",
                     "strict"):
            if name in doc:
                kwargs[name] = doc[name]
        return SessionConfig(**kwargs)
    except TypeError as e:
        raise ConfigError(f"malformed session config: {e}") from None


def load_config(path: str) -> SessionConfig:
    with open(path, "r", encoding="utf-8") as fp:
        try:
            doc = json.load(fp)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not JSON: {e}") from None
    return config_from_dict(doc)


def save_config(cfg: SessionConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        json.dump(config_to_dict(cfg), fp, indent=2, sort_keys=True)
        fp.write("\n")
