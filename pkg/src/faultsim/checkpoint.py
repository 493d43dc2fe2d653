"""History-based checkpoint log and rollback with three target strategies."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .devices import DeviceKind, Registry, SystemSnapshot


class RollbackStrategy(Enum):
    MOST_RECENT = "most_recent"
    FAIL_SAFE = "fail_safe"
    FAIL_NORM = "fail_norm"
    DISABLED = "disabled"


class RollbackFailure(Enum):
    NO_MATCH = "no_match"
    FAULTY_ACTUATOR_BLOCKS = "faulty_actuator_blocks"


@dataclass
class RollbackResult:
    success: bool
    actuations: int = 0
    failure: Optional[RollbackFailure] = None
    target: Optional["Checkpoint"] = None


@dataclass
class Checkpoint:
    sensor_states: dict
    actuator_states: dict
    last_tick: int
    frequency: int = 1


@dataclass
class PendingCheckpoint:
    snapshot: SystemSnapshot
    taken_tick: int


class CheckpointLog:
    """Committed checkpoints keyed by sensor-state vector, with frequencies.

    A new snapshot waits out the fault-identification bound before it commits,
    so snapshots overlapping a fault are discarded.
    """

    def __init__(self, tolerances: Optional[dict] = None):
        self.entries: list[Checkpoint] = []
        self.pending: list[PendingCheckpoint] = []
        # per-device absolute match tolerance; binary devices match exactly
        self.tolerances = dict(tolerances or {})

    def sensors_match(self, a: dict, b: dict, exclude: set = frozenset()) -> bool:
        keys = set(a) - exclude
        if keys != set(b) - exclude:
            return False
        return all(abs(a[k] - b[k]) <= self.tolerances.get(k, 0.0) for k in keys)

    def take(self, snapshot: SystemSnapshot) -> None:
        self.pending.append(PendingCheckpoint(snapshot, snapshot.tick))

    def process_pending(self, tick: int, identification_bound: int, oracle) -> None:
        """Commit pending snapshots whose validation window elapsed fault-free."""
        still_pending = []
        for p in self.pending:
            deadline = p.taken_tick + identification_bound
            window_faulty = any(
                not oracle.fault_free_window(dev, p.taken_tick, min(tick, deadline))
                for dev in list(p.snapshot.sensor_states) + list(p.snapshot.actuator_states)
            )
            if window_faulty:
                continue
            if tick >= deadline:
                self._commit(p.snapshot)
            else:
                still_pending.append(p)
        self.pending = still_pending

    def _commit(self, snapshot: SystemSnapshot) -> None:
        for entry in self.entries:
            if self._exact_sensor_match(entry.sensor_states, snapshot.sensor_states):
                if entry.actuator_states == snapshot.actuator_states:
                    entry.frequency += 1
                else:
                    entry.actuator_states = dict(snapshot.actuator_states)
                    entry.frequency = 1
                entry.last_tick = snapshot.tick
                return
        self.entries.append(Checkpoint(dict(snapshot.sensor_states),
                                       dict(snapshot.actuator_states), snapshot.tick))

    @staticmethod
    def _exact_sensor_match(a: dict, b: dict) -> bool:
        # log keying is exact; the tolerance applies only to rollback matching
        return a == b

    def evict_stale(self, now: int, ttl: int) -> int:
        """Drop committed entries unused for longer than ttl ticks."""
        if ttl <= 0:
            raise ValueError("ttl must be positive")
        before = len(self.entries)
        self.entries = [e for e in self.entries if now - e.last_tick <= ttl]
        return before - len(self.entries)

    # -- dump / restore ----------------------------------------------------

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump([{"sensor_states": e.sensor_states,
                        "actuator_states": e.actuator_states,
                        "last_tick": e.last_tick,
                        "frequency": e.frequency} for e in self.entries],
                      fh, indent=2, sort_keys=True)

    def restore(self, path) -> None:
        with open(path) as fh:
            records = json.load(fh)
        self.entries = [Checkpoint(r["sensor_states"], r["actuator_states"],
                                   r["last_tick"], r["frequency"]) for r in records]


def select_checkpoint(log: CheckpointLog, strategy: RollbackStrategy,
                      current_sensors: dict, faulty_sensors: set,
                      fail_safe_states: dict) -> Optional[Checkpoint]:
    """Pick the rollback target for a strategy, or None when nothing fits.

    Faulty sensors are excluded from state matching. Frequency breaks ties,
    then recency.
    """
    entries = log.entries
    if not entries:
        return None
    if strategy is RollbackStrategy.MOST_RECENT:
        return max(entries, key=lambda e: e.last_tick)

    def norm_matches(pool):
        return [e for e in pool
                if log.sensors_match(e.sensor_states, current_sensors, exclude=faulty_sensors)]

    def best(pool):
        return max(pool, key=lambda e: (e.frequency, e.last_tick))

    if strategy is RollbackStrategy.FAIL_NORM:
        matches = norm_matches(entries)
        return best(matches) if matches else None

    if strategy is RollbackStrategy.FAIL_SAFE:
        safe = [e for e in entries
                if all(e.actuator_states.get(dev) == val
                       for dev, val in fail_safe_states.items()
                       if dev in e.actuator_states)]
        if not safe:
            matches = norm_matches(entries)
            return best(matches) if matches else None
        matches = norm_matches(safe)
        if len(matches) == 1:
            return matches[0]
        return best(matches if matches else safe)

    return None


def rollback(trigger_device: str, log: CheckpointLog, registry: Registry,
             strategy: RollbackStrategy, tick: int) -> RollbackResult:
    """Actuate the system to the best-matching checkpoint, all or nothing.

    Fails without issuing any actuation when no checkpoint fits or when any
    actuator that would need to change is itself faulty. On success, the live
    values of faulty sensors are overwritten with the checkpoint values until
    repair or a later rollback.
    """
    if strategy is RollbackStrategy.DISABLED:
        return RollbackResult(False, failure=RollbackFailure.NO_MATCH)
    snapshot = registry.snapshot(tick)
    faulty = {d for d in registry.devices if registry.fault_table.get(d) is not None}
    fail_safe_states = {d: s.fail_safe_state for d, s in registry.devices.items()
                        if s.kind is DeviceKind.ACTUATOR and s.fail_safe_state is not None}
    target = select_checkpoint(log, strategy, snapshot.sensor_states,
                               faulty & set(snapshot.sensor_states), fail_safe_states)
    if target is None:
        return RollbackResult(False, failure=RollbackFailure.NO_MATCH)
    mismatched = [d for d, v in target.actuator_states.items()
                  if d in snapshot.actuator_states and snapshot.actuator_states[d] != v]
    if any(d in faulty for d in mismatched):
        return RollbackResult(False, failure=RollbackFailure.FAULTY_ACTUATOR_BLOCKS, target=target)
    for device in sorted(mismatched):
        registry.actuate(device, target.actuator_states[device], tick, bypass_suppression=True)
    for device in sorted(faulty & set(target.sensor_states)):
        if registry.devices[device].kind is DeviceKind.SENSOR:
            registry.overrides[device] = target.sensor_states[device]
    return RollbackResult(True, actuations=len(mismatched), target=target)
