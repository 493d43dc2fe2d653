"""Configuration file: general parameters, per-device and per-app settings."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Optional

from .checkpoint import RollbackStrategy
from .devices import DeviceKind, Registry
from .schemes import BUILTIN_SCHEMES


class SchemaError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class NotifyTrigger:
    OCCURRED = "occurred"
    REPAIRED = "repaired"
    UNREPAIRED = "unrepaired"
    ALL = frozenset({OCCURRED, REPAIRED, UNREPAIRED})


@dataclass
class RedundancyDetection:
    window: int = 5000
    agreement: float = 0.99
    transition_tolerance: float = 0.05


@dataclass
class GeneralConfig:
    identification_upper_bound: int = 0
    checkpoint_ttl: int = 20000
    sensor_match_tolerance: float = 2.0  # absolute, real-valued sensors only
    retry_consecutive_matches: int = 3
    redundancy_detection: RedundancyDetection = field(default_factory=RedundancyDetection)


@dataclass
class DeviceConfig:
    scheme: str = "conservative"
    replicas: list[str] = field(default_factory=list)
    rollback_strategy: RollbackStrategy = RollbackStrategy.FAIL_NORM
    retry_max: int = 30
    restart_attempts: int = 3
    notify_triggers: set = field(default_factory=lambda: set(NotifyTrigger.ALL))
    fail_safe_state: Optional[float] = None


@dataclass
class AppConfig:
    suppression_enabled: bool = False


@dataclass
class ConfigFile:
    general: GeneralConfig = field(default_factory=GeneralConfig)
    devices: dict[str, DeviceConfig] = field(default_factory=dict)
    apps: dict[str, AppConfig] = field(default_factory=dict)

    def device(self, dev_id: str) -> DeviceConfig:
        return self.devices.setdefault(dev_id, DeviceConfig())


# Per-type-class defaults: scheme, retry window, restart attempts, rollback.
# Sensors whose streams correlate with others get fail-norm rollback; the
# contact sensor and temperature sensor do not.
TYPE_CLASS_CONFIG = {
    "S1": {"scheme": "conservative", "rollback_strategy": RollbackStrategy.FAIL_NORM},
    "S2": {"scheme": "transient_resistant", "rollback_strategy": RollbackStrategy.DISABLED},
    "S3": {"scheme": "transient_resistant", "rollback_strategy": RollbackStrategy.DISABLED},
    "S4": {"scheme": "conservative", "rollback_strategy": RollbackStrategy.FAIL_NORM},
    "S5": {"scheme": "time_sensitive", "rollback_strategy": RollbackStrategy.FAIL_NORM},
    "S6": {"scheme": "time_sensitive", "rollback_strategy": RollbackStrategy.FAIL_NORM},
    "A1": {"scheme": "conservative", "rollback_strategy": RollbackStrategy.FAIL_NORM},
    "A2": {"scheme": "conservative", "rollback_strategy": RollbackStrategy.FAIL_NORM},
}


def init_config(registry: Registry) -> ConfigFile:
    """Build defaults for every registered device from its type class.

    Unknown type classes fall back to the conservative scheme.
    """
    config = ConfigFile()
    for dev_id in sorted(registry.devices):
        spec = registry.devices[dev_id]
        overrides = TYPE_CLASS_CONFIG.get(spec.type_class, {})
        dc = DeviceConfig(**{k: (set(v) if isinstance(v, frozenset) else v)
                             for k, v in overrides.items()})
        if spec.fail_safe_state is not None:
            dc.fail_safe_state = spec.fail_safe_state
        config.devices[dev_id] = dc
    return config


def _device_to_json(dc: DeviceConfig) -> dict:
    return {
        "scheme": dc.scheme,
        "replicas": list(dc.replicas),
        "rollback_strategy": dc.rollback_strategy.value,
        "retry_max": dc.retry_max,
        "restart_attempts": dc.restart_attempts,
        "notify_triggers": sorted(dc.notify_triggers),
        "fail_safe_state": dc.fail_safe_state,
    }


def save_config(config: ConfigFile, path) -> None:
    data = {
        "general": {
            "identification_upper_bound": config.general.identification_upper_bound,
            "checkpoint_ttl": config.general.checkpoint_ttl,
            "sensor_match_tolerance": config.general.sensor_match_tolerance,
            "retry_consecutive_matches": config.general.retry_consecutive_matches,
            "redundancy_detection": asdict(config.general.redundancy_detection),
        },
        "devices": {d: _device_to_json(c) for d, c in sorted(config.devices.items())},
        "apps": {a: {"suppression_enabled": c.suppression_enabled}
                 for a, c in sorted(config.apps.items())},
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)


def _expect(mapping, key, types, path):
    if key not in mapping:
        raise SchemaError(f"{path}.{key}", "missing required field")
    value = mapping[key]
    if not isinstance(value, types):
        raise SchemaError(f"{path}.{key}", f"expected {types}, got {type(value).__name__}")
    return value


def load_config(path) -> ConfigFile:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise SchemaError("$", "config root must be an object")
    config = ConfigFile()
    gen = data.get("general", {})
    g = config.general
    g.identification_upper_bound = int(gen.get("identification_upper_bound", g.identification_upper_bound))
    g.checkpoint_ttl = int(gen.get("checkpoint_ttl", g.checkpoint_ttl))
    g.sensor_match_tolerance = float(gen.get("sensor_match_tolerance", g.sensor_match_tolerance))
    g.retry_consecutive_matches = int(gen.get("retry_consecutive_matches", g.retry_consecutive_matches))
    rd = gen.get("redundancy_detection", {})
    g.redundancy_detection = RedundancyDetection(
        window=int(rd.get("window", 5000)),
        agreement=float(rd.get("agreement", 0.99)),
        transition_tolerance=float(rd.get("transition_tolerance", 0.05)))
    for dev_id, rec in data.get("devices", {}).items():
        path_d = f"devices.{dev_id}"
        if not isinstance(rec, dict):
            raise SchemaError(path_d, "device entry must be an object")
        dc = DeviceConfig()
        if "scheme" in rec:
            scheme = _expect(rec, "scheme", str, path_d)
            if scheme not in BUILTIN_SCHEMES:
                raise SchemaError(f"{path_d}.scheme", f"unknown scheme {scheme!r}")
            dc.scheme = scheme
        if "rollback_strategy" in rec:
            try:
                dc.rollback_strategy = RollbackStrategy(rec["rollback_strategy"])
            except ValueError:
                raise SchemaError(f"{path_d}.rollback_strategy",
                                  f"unknown strategy {rec['rollback_strategy']!r}") from None
        if "replicas" in rec:
            dc.replicas = [str(r) for r in _expect(rec, "replicas", list, path_d)]
        if "retry_max" in rec:
            dc.retry_max = int(rec["retry_max"])
        if "restart_attempts" in rec:
            dc.restart_attempts = int(rec["restart_attempts"])
        if "notify_triggers" in rec:
            triggers = set(_expect(rec, "notify_triggers", list, path_d))
            bad = triggers - NotifyTrigger.ALL
            if bad:
                raise SchemaError(f"{path_d}.notify_triggers", f"unknown triggers {sorted(bad)}")
            dc.notify_triggers = triggers
        if rec.get("fail_safe_state") is not None:
            dc.fail_safe_state = float(rec["fail_safe_state"])
        config.devices[dev_id] = dc
    for app_id, rec in data.get("apps", {}).items():
        if not isinstance(rec, dict):
            raise SchemaError(f"apps.{app_id}", "app entry must be an object")
        config.apps[app_id] = AppConfig(bool(rec.get("suppression_enabled", False)))
    return config
