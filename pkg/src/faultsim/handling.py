"""Developer-facing fault-handling functions.

Functions that must wait out simulated time (retry, restarts) are written as
generators: each ``yield`` suspends until the next poll tick. The automated
handler composes them; direct callers can drive them with
``Simulation.run_handler``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .config import ConfigFile, NotifyTrigger
from .devices import (ActuationResult, DeviceKind, Health, NotActuator, Registry,
                      SuppressedDevice, Unresponsive)
from .faults import FaultKind, Fixability


class RetryOutcome(Enum):
    RESOLVED = "resolved"
    TIMED_OUT = "timed_out"
    STILL_FAULTY = "still_faulty"


def activate_redundant_device(device: str, config: ConfigFile, registry: Registry) -> bool:
    """Redirect polls and commands to the first healthy configured replica.

    Returns False when no usable replica exists. The redirect is removed by
    the hub once the device is no longer faulty.
    """
    dc = config.device(device)
    for replica in dc.replicas:
        if replica == device or replica not in registry.devices:
            continue
        if replica in registry.redirects:
            continue
        if registry.fault_table.get(replica) is None:
            registry.install_redirect(device, replica)
            return True
    return False


def _lift_suppression(env, device: str) -> None:
    unsuppress_device(env.registry, device)
    release_apps_for(device, env.engine)


def _restore_suppression(env, device: str) -> None:
    suppress_device(env.registry, device)
    suppress_apps_for(device, env.engine, env.config)


def _await_identification(env, device: str):
    """Lift suppression and wait the identification bound; True when the
    window passes with no fault detected."""
    _lift_suppression(env, device)
    bound = env.config.general.identification_upper_bound
    for _ in range(bound):
        if env.oracle.is_faulty(device):
            _restore_suppression(env, device)
            return False
        yield
    if env.oracle.is_faulty(device):
        _restore_suppression(env, device)
        return False
    return True


def retry(env, device: str, verify_fn: Optional[Callable[[], bool]] = None,
          expected_values: Optional[list] = None, is_failstop: Optional[bool] = None):
    """Stall handling long enough for a transient fault to clear.

    With no optional arguments, delays for the device's configured maximum and
    then certifies through the identifier. A verify function is polled until
    it reports the fault cleared; an expected-value list resolves after K
    consecutive matching polls; for fail-stop faults any successful read
    counts. Never issues actuations.
    """
    dc = env.config.device(device)
    k_needed = env.config.general.retry_consecutive_matches
    fault = env.registry.fault_table.get(device)
    if is_failstop is None:
        is_failstop = fault is not None and fault.kind.fail_stop

    if verify_fn is not None:
        for _ in range(dc.retry_max):
            if not verify_fn():
                return RetryOutcome.RESOLVED
            yield
        return RetryOutcome.TIMED_OUT

    if expected_values is not None or is_failstop:
        matches = 0
        for _ in range(dc.retry_max):
            state = env.registry.read_device(device, env.tick, bypass_suppression=True)
            if state.health is Health.UNRESPONSIVE:
                matches = 0
            elif is_failstop or state.value in (expected_values or []):
                matches += 1
            else:
                matches = 0
            if matches >= k_needed:
                return RetryOutcome.RESOLVED
            yield
        if is_failstop:
            return RetryOutcome.TIMED_OUT
    else:
        for _ in range(dc.retry_max):
            yield

    if is_failstop:
        return RetryOutcome.TIMED_OUT
    confirmed = yield from _await_identification(env, device)
    return RetryOutcome.RESOLVED if confirmed else RetryOutcome.STILL_FAULTY


def _device_restart(env, device: str, soft: bool):
    registry = env.registry
    spec = registry.devices[device]
    dc = env.config.device(device)
    if soft and not spec.supports_soft_restart:
        return False
    if not soft and not spec.supports_hard_restart:
        return False
    attempts = min(dc.restart_attempts, spec.max_restart_attempts)
    acked = False
    for _ in range(attempts):
        fault = registry.fault_table.get(device)
        responsive = fault is None or not fault.kind.fail_stop
        yield  # command sent; acknowledgment arrives next tick, if ever
        if responsive:
            acked = True
            break
    if not acked:
        return False
    duration_ticks = max(1, round((spec.soft_restart_ms if soft else spec.hard_restart_ms) / 1000.0))
    for _ in range(duration_ticks):
        yield
    env.count_restart(device, "soft" if soft else "hard")
    fault = registry.fault_table.get(device)
    if fault is not None:
        wanted = Fixability.SOFT_FIXABLE if soft else Fixability.HARD_FIXABLE
        if fault.fixability is wanted and not fault.kind.fail_stop:
            registry.fault_table.clear(device)
    confirmed = yield from _await_identification(env, device)
    return confirmed


def device_software_restart(env, device: str):
    """Restart the device's software; True when the fault is gone afterwards."""
    result = yield from _device_restart(env, device, soft=True)
    return result


def device_hardware_restart(env, device: str):
    """Power-cycle the device; True when the fault is gone afterwards."""
    result = yield from _device_restart(env, device, soft=False)
    return result


@dataclass
class NotificationRecord:
    tick: int
    device: str
    fault_kind: Optional[FaultKind]
    outcome: str


class NotificationLog:
    """Console + file notification sink, one line per record."""

    def __init__(self, path=None, echo: bool = False):
        self.records: list[NotificationRecord] = []
        self.path = path
        self.echo = echo

    def append(self, record: NotificationRecord) -> None:
        self.records.append(record)
        line = "{},{},{},{}".format(record.tick, record.device,
                                    record.fault_kind.value if record.fault_kind else "-",
                                    record.outcome)
        if self.echo:
            print(line)
        if self.path is not None:
            with open(self.path, "a") as fh:
                fh.write(line + "\n")


def notify_user(env, device: str, event: str, fault_kind: Optional[FaultKind] = None) -> None:
    """Record a fault-handling notification if the device's triggers include it."""
    dc = env.config.device(device)
    if event in dc.notify_triggers:
        env.notifications.append(NotificationRecord(env.tick, device, fault_kind, event))


# -- transaction -----------------------------------------------------------

class TransactionStatus(Enum):
    COMMITTED = "committed"
    ABORTED = "aborted"
    PARTIAL_ABORT = "partial_abort"


@dataclass
class TransactionResult:
    status: TransactionStatus
    failed_step: Optional[int] = None
    log: list = field(default_factory=list)


def transaction(actuations: list[tuple[str, float]], registry: Registry,
                tick: int) -> TransactionResult:
    """Apply actuations atomically with an undo log.

    On any failure the prior states are restored in reverse order; a failure
    during restoration is reported as a partial abort, never silently.
    """
    undo: list[tuple[str, float]] = []
    for i, (device, value) in enumerate(actuations):
        spec = registry.require(device)
        if spec.kind is not DeviceKind.ACTUATOR:
            raise NotActuator(device)
        prior = registry.commanded(registry.redirects.get(device, device))
        try:
            result = registry.actuate(device, value, tick)
        except (SuppressedDevice, Unresponsive):
            result = None
        if result is not ActuationResult.SUCCESS:
            for dev, old in reversed(undo):
                try:
                    restored = registry.actuate(dev, old, tick)
                except (SuppressedDevice, Unresponsive):
                    restored = None
                if restored is not ActuationResult.SUCCESS:
                    return TransactionResult(TransactionStatus.PARTIAL_ABORT, i, undo)
            return TransactionResult(TransactionStatus.ABORTED, i, undo)
        undo.append((device, prior))
    return TransactionResult(TransactionStatus.COMMITTED, log=undo)


# -- suppression -----------------------------------------------------------

def suppress_device(registry: Registry, device: str) -> None:
    registry.require(device)
    registry.suppressed.add(device)


def unsuppress_device(registry: Registry, device: str) -> None:
    registry.require(device)
    registry.suppressed.discard(device)


def suppress_apps_for(device: str, engine, config: ConfigFile) -> None:
    """Halt every suppression-enabled app subscribed to the device."""
    for app in engine.apps:
        enabled = app.suppression_enabled or (
            app.id in config.apps and config.apps[app.id].suppression_enabled)
        if enabled and device in app.subscriptions:
            engine.suppressed_apps.add(app.id)


def release_apps_for(device: str, engine) -> None:
    for app in engine.apps:
        if app.id in engine.suppressed_apps and device in app.subscriptions:
            engine.suppressed_apps.discard(app.id)


# -- auxiliary configuration operations ------------------------------------

class ValidationError(ValueError):
    def __init__(self, fieldname: str, message: str):
        super().__init__(f"{fieldname}: {message}")
        self.field = fieldname


def add_device(spec, config: ConfigFile, registry: Registry,
               on_added: Optional[Callable] = None) -> bool:
    """Register a device and its default config; triggers redundancy re-detection."""
    if spec.id in registry.devices:
        raise ValidationError("id", f"duplicate device id {spec.id!r}")
    registry.add(spec)
    config.device(spec.id)
    if on_added is not None:
        on_added(spec.id)
    return True


def remove_device(dev_id: str, config: ConfigFile, registry: Registry) -> bool:
    if dev_id not in registry.devices:
        raise ValidationError("id", f"unknown device {dev_id!r}")
    registry.remove(dev_id)
    config.devices.pop(dev_id, None)
    for dc in config.devices.values():
        dc.replicas = [r for r in dc.replicas if r != dev_id]
    return True


_DEVICE_OPTION_VALIDATORS = {
    "scheme": lambda v: isinstance(v, str),
    "replicas": lambda v: isinstance(v, list),
    "rollback_strategy": lambda v: True,
    "retry_max": lambda v: isinstance(v, int) and v > 0,
    "restart_attempts": lambda v: isinstance(v, int) and v > 0,
    "notify_triggers": lambda v: isinstance(v, (set, list)),
    "fail_safe_state": lambda v: isinstance(v, (int, float)) or v is None,
}


def update_device_config(dev_id: str, options: dict, config: ConfigFile,
                         registry: Registry) -> bool:
    from .checkpoint import RollbackStrategy
    from .schemes import BUILTIN_SCHEMES
    if dev_id not in registry.devices:
        raise ValidationError("device", f"unknown device {dev_id!r}")
    dc = config.device(dev_id)
    for key, value in options.items():
        if key not in _DEVICE_OPTION_VALIDATORS:
            raise ValidationError(key, "unknown device option")
        if not _DEVICE_OPTION_VALIDATORS[key](value):
            raise ValidationError(key, f"invalid value {value!r}")
        if key == "scheme" and value not in BUILTIN_SCHEMES:
            raise ValidationError("scheme", f"unknown scheme {value!r}")
        if key == "rollback_strategy" and not isinstance(value, RollbackStrategy):
            try:
                value = RollbackStrategy(value)
            except ValueError:
                raise ValidationError("rollback_strategy", f"unknown strategy {value!r}") from None
        if key == "notify_triggers":
            triggers = set(value)
            bad = triggers - NotifyTrigger.ALL
            if bad:
                raise ValidationError("notify_triggers", f"unknown triggers {sorted(bad)}")
            value = triggers
        setattr(dc, key, value)
    return True


def update_app_config(app_id: str, options: dict, config: ConfigFile) -> bool:
    from .config import AppConfig
    ac = config.apps.setdefault(app_id, AppConfig())
    for key, value in options.items():
        if key != "suppression_enabled":
            raise ValidationError(key, "unknown app option")
        ac.suppression_enabled = bool(value)
    return True
