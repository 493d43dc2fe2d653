"""Device specifications, registry, polling, and actuation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields as dc_fields
from enum import Enum
from typing import Callable, Optional

from .faults import ActiveFault, FaultKind, FaultTable, transform_reading


class DeviceKind(Enum):
    SENSOR = "sensor"
    ACTUATOR = "actuator"


class Health(Enum):
    OK = "ok"
    FAULTY = "faulty"
    UNRESPONSIVE = "unresponsive"
    SUPPRESSED = "suppressed"


@dataclass(frozen=True)
class ValueDomain:
    """Allowed value range for a device; binary devices use {0, 1}."""

    kind: str  # "binary" | "integer" | "real"
    lo: float = 0.0
    hi: float = 1.0
    unit: str = ""

    @property
    def binary(self) -> bool:
        return self.kind == "binary"

    def clamp(self, value: float) -> float:
        if self.binary:
            return 1.0 if value >= 0.5 else 0.0
        value = min(max(value, self.lo), self.hi)
        if self.kind == "integer":
            value = float(round(value))
        return value

    def contains(self, value: float) -> bool:
        if self.binary:
            return value in (0.0, 1.0, 0, 1)
        return self.lo <= value <= self.hi

    def to_json(self) -> dict:
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi, "unit": self.unit}


BINARY = ValueDomain("binary")

# Per-type-class power draw (mW) and state read time (ms).
TYPE_CLASS_DEFAULTS = {
    "S1": {"power_mw": 66.0, "read_latency_ms": 0.1},    # motion sensor
    "S2": {"power_mw": 0.1, "read_latency_ms": 0.1},     # contact sensor
    "S3": {"power_mw": 19.5, "read_latency_ms": 37.5},   # temperature sensor
    "S4": {"power_mw": 1.3, "read_latency_ms": 0.5},     # presence sensor
    "S5": {"power_mw": 30.0, "read_latency_ms": 0.96},   # smoke detector
    "S6": {"power_mw": 80.0, "read_latency_ms": 0.1},    # leak detector
    "A1": {"power_mw": 0.01, "read_latency_ms": 0.1},    # lock, coffee machine, light
    "A2": {"power_mw": 100.0, "read_latency_ms": 0.1},   # alarm, AC, heater, window, valve
}


class UnknownDevice(KeyError):
    pass


class NotActuator(ValueError):
    pass


class SuppressedDevice(RuntimeError):
    pass


class Unresponsive(RuntimeError):
    pass


@dataclass
class DeviceSpec:
    id: str
    name: str
    kind: DeviceKind
    type_class: str
    value_domain: ValueDomain = BINARY
    power_mw: float = 0.0
    read_latency_ms: float = 0.1
    supports_soft_restart: bool = True
    supports_hard_restart: bool = True
    soft_restart_ms: float = 5000.0
    hard_restart_ms: float = 10000.0
    max_restart_attempts: int = 3
    fail_safe_state: Optional[float] = None
    initial_value: float = 0.0
    momentary: bool = False  # resets to 0 at every tick start (notification sink)

    def __post_init__(self):
        if self.power_mw < 0 or self.read_latency_ms < 0:
            raise ValueError(f"{self.id}: power and read latency must be nonnegative")
        if self.max_restart_attempts < 1:
            raise ValueError(f"{self.id}: max_restart_attempts must be >= 1")
        if self.fail_safe_state is not None and self.kind is not DeviceKind.ACTUATOR:
            raise ValueError(f"{self.id}: fail_safe_state is only valid for actuators")

    @classmethod
    def for_type_class(cls, dev_id: str, name: str, kind: DeviceKind, type_class: str, **overrides) -> "DeviceSpec":
        defaults = TYPE_CLASS_DEFAULTS[type_class]
        merged = {**defaults, **overrides}
        return cls(id=dev_id, name=name, kind=kind, type_class=type_class, **merged)


@dataclass
class DeviceState:
    device: str
    value: float
    tick: int
    health: Health = Health.OK
    fault_kind: Optional[FaultKind] = None


@dataclass
class SystemSnapshot:
    sensor_states: dict
    actuator_states: dict
    tick: int


class ActuationResult(Enum):
    SUCCESS = "success"
    NO_EFFECT = "no_effect"


class Registry:
    """All device state flows through here: polls, actuations, suppression, redirects.

    Owned by the simulation loop (single writer); snapshots are plain dict
    copies and safe to share.
    """

    def __init__(self, specs: Optional[list[DeviceSpec]] = None):
        self.devices: dict[str, DeviceSpec] = {}
        self.suppressed: set[str] = set()
        self.redirects: dict[str, str] = {}
        self.live_values: dict[str, DeviceState] = {}
        self.overrides: dict[str, float] = {}  # faulty-sensor data-rollback values
        self._commanded: dict[str, float] = {}
        self.fault_table: FaultTable = FaultTable()
        self.sensor_truth: Callable[[str, int], float] = lambda dev, tick: 0.0
        self.actuation_log: list[tuple[int, str, float]] = []
        self.restart_log: list[tuple[int, str, str]] = []
        for spec in specs or []:
            self.add(spec)

    def add(self, spec: DeviceSpec) -> None:
        if spec.id in self.devices:
            raise ValueError(f"duplicate device id {spec.id!r}")
        self.devices[spec.id] = spec
        self.live_values[spec.id] = DeviceState(spec.id, spec.initial_value, -1)
        if spec.kind is DeviceKind.ACTUATOR:
            self._commanded[spec.id] = spec.initial_value

    def remove(self, dev_id: str) -> None:
        self.require(dev_id)
        del self.devices[dev_id]
        self.live_values.pop(dev_id, None)
        self._commanded.pop(dev_id, None)
        self.suppressed.discard(dev_id)
        self.overrides.pop(dev_id, None)
        self.redirects = {a: b for a, b in self.redirects.items() if dev_id not in (a, b)}

    def require(self, dev_id: str) -> DeviceSpec:
        try:
            return self.devices[dev_id]
        except KeyError:
            raise UnknownDevice(dev_id) from None

    def sensors(self) -> list[str]:
        return sorted(d for d, s in self.devices.items() if s.kind is DeviceKind.SENSOR)

    def actuators(self) -> list[str]:
        return sorted(d for d, s in self.devices.items() if s.kind is DeviceKind.ACTUATOR)

    def commanded(self, dev_id: str) -> float:
        return self._commanded[dev_id]

    # -- redirects ---------------------------------------------------------

    def install_redirect(self, faulty: str, replica: str) -> None:
        self.require(faulty)
        self.require(replica)
        if replica in self.redirects:
            raise ValueError(f"redirect target {replica!r} is itself redirected")
        # keep redirects chain-free: retarget anything pointing at the new source
        for src, dst in list(self.redirects.items()):
            if dst == faulty:
                self.redirects[src] = replica
        self.redirects[faulty] = replica

    def remove_redirect(self, faulty: str) -> None:
        self.redirects.pop(faulty, None)

    # -- polling and actuation --------------------------------------------

    def read_device(self, dev_id: str, tick: int, bypass_suppression: bool = False) -> DeviceState:
        """Poll one device: trace or commanded value, transformed by any active fault."""
        spec = self.require(dev_id)
        last = self.live_values[dev_id]
        if dev_id in self.suppressed and not bypass_suppression:
            return DeviceState(dev_id, last.value, tick, Health.SUPPRESSED)
        target = self.redirects.get(dev_id, dev_id)
        target_spec = self.devices[target]
        if target_spec.kind is DeviceKind.SENSOR:
            true_value = self.sensor_truth(target, tick)
        else:
            true_value = self._commanded[target]
        fault = self.fault_table.get(target)
        if fault is None:
            state = DeviceState(dev_id, target_spec.value_domain.clamp(true_value), tick)
        elif fault.kind.fail_stop:
            prior = self.live_values[target]
            state = DeviceState(dev_id, prior.value, tick, Health.UNRESPONSIVE, fault.kind)
        else:
            if target_spec.kind is DeviceKind.SENSOR and target in self.overrides:
                observed = self.overrides[target]
            else:
                observed = transform_reading(true_value, fault, tick, target_spec.value_domain)
            state = DeviceState(dev_id, observed, tick, Health.FAULTY, fault.kind)
        self.live_values[target] = DeviceState(target, state.value, tick, state.health, state.fault_kind)
        if target != dev_id:
            self.live_values[dev_id] = state
        return state

    def actuate(self, dev_id: str, value: float, tick: int,
                bypass_suppression: bool = False) -> ActuationResult:
        """Command an actuator; faults may absorb or reject the command."""
        spec = self.require(dev_id)
        if spec.kind is not DeviceKind.ACTUATOR:
            raise NotActuator(dev_id)
        if not spec.value_domain.contains(value):
            raise ValueError(f"{dev_id}: value {value} outside domain")
        if dev_id in self.suppressed and not bypass_suppression:
            raise SuppressedDevice(dev_id)
        target = self.redirects.get(dev_id, dev_id)
        fault = self.fault_table.get(target)
        if fault is not None:
            if fault.kind.fail_stop:
                raise Unresponsive(dev_id)
            if fault.kind is FaultKind.STUCK_AT:
                return ActuationResult.NO_EFFECT
        self._commanded[target] = float(value)
        self.actuation_log.append((tick, target, float(value)))
        return ActuationResult.SUCCESS

    def snapshot(self, tick: int) -> SystemSnapshot:
        """Current live values for every device, split by kind.

        Unresponsive devices contribute their last known value.
        """
        sensor_states = {d: self.live_values[d].value for d in self.sensors()}
        actuator_states = {d: self.live_values[d].value for d in self.actuators()}
        return SystemSnapshot(sensor_states, actuator_states, tick)


# -- catalog file ----------------------------------------------------------

_SPEC_FIELDS = {f.name for f in dc_fields(DeviceSpec)}


def spec_to_json(spec: DeviceSpec) -> dict:
    out = {
        "id": spec.id, "name": spec.name, "kind": spec.kind.value,
        "type_class": spec.type_class, "value_domain": spec.value_domain.to_json(),
        "power_mw": spec.power_mw, "read_latency_ms": spec.read_latency_ms,
        "supports_soft_restart": spec.supports_soft_restart,
        "supports_hard_restart": spec.supports_hard_restart,
        "soft_restart_ms": spec.soft_restart_ms, "hard_restart_ms": spec.hard_restart_ms,
        "max_restart_attempts": spec.max_restart_attempts,
        "initial_value": spec.initial_value, "momentary": spec.momentary,
    }
    if spec.fail_safe_state is not None:
        out["fail_safe_state"] = spec.fail_safe_state
    return out


def spec_from_json(record: dict) -> DeviceSpec:
    unknown = set(record) - _SPEC_FIELDS
    if unknown:
        raise ValueError(f"unknown device catalog fields: {sorted(unknown)}")
    record = dict(record)
    record["kind"] = DeviceKind(record["kind"])
    if "value_domain" in record:
        record["value_domain"] = ValueDomain(**record["value_domain"])
    return DeviceSpec(**record)


def save_catalog(path, specs: list[DeviceSpec]) -> None:
    with open(path, "w") as fh:
        json.dump([spec_to_json(s) for s in specs], fh, indent=2, sort_keys=True)


def load_catalog(path) -> list[DeviceSpec]:
    with open(path) as fh:
        records = json.load(fh)
    return [spec_from_json(r) for r in records]


# -- default home ----------------------------------------------------------

TEMPERATURE_DOMAIN = ValueDomain("real", 0.0, 120.0, "F")
NOTIFY_SINK_ID = "sms"


def default_home() -> list[DeviceSpec]:
    """The 17-device home: one sensor per class plus a replicated smoke
    detector, and ten actuators."""
    S, A = DeviceKind.SENSOR, DeviceKind.ACTUATOR
    mk = DeviceSpec.for_type_class
    return [
        mk("motion", "Motion sensor", S, "S1"),
        mk("contact", "Contact sensor", S, "S2"),
        mk("temperature", "Temperature sensor", S, "S3", value_domain=TEMPERATURE_DOMAIN, initial_value=70.0),
        mk("presence", "Presence sensor", S, "S4"),
        mk("smoke", "Smoke detector", S, "S5"),
        mk("smoke_rep", "Smoke detector (replica)", S, "S5"),
        mk("leak", "Leak detector", S, "S6"),
        mk("door_lock", "Door lock", A, "A1", fail_safe_state=1.0, initial_value=1.0),
        mk("coffee_machine", "Coffee machine", A, "A1", fail_safe_state=0.0),
        mk("light", "Light", A, "A1", fail_safe_state=0.0),
        mk("light2", "Light 2", A, "A1", fail_safe_state=0.0),
        mk("alarm", "Alarm", A, "A2", fail_safe_state=1.0),
        mk("ac", "Air conditioner", A, "A2", fail_safe_state=0.0),
        mk("heater", "Heater", A, "A2", fail_safe_state=0.0),
        mk("window", "Window opener", A, "A2", fail_safe_state=0.0),
        mk("window2", "Window opener 2", A, "A2", fail_safe_state=0.0),
        mk("water_valve", "Water valve", A, "A2", fail_safe_state=0.0, initial_value=1.0),
    ]


def notification_sink() -> DeviceSpec:
    """Virtual actuator that models SMS/push notifications as 1-tick pulses."""
    return DeviceSpec(NOTIFY_SINK_ID, "Notification sink", DeviceKind.ACTUATOR, "A1",
                      power_mw=0.0, momentary=True, supports_soft_restart=False,
                      supports_hard_restart=False)
