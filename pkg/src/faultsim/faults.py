"""Fault schedule parsing, activation, reading transforms, and identification."""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional


class FaultKind(Enum):
    POWER = "POWER"
    COMMUNICATION = "COMMUNICATION"
    CRITICAL_ERROR = "CRITICAL_ERROR"
    OUTLIER = "OUTLIER"
    STUCK_AT = "STUCK_AT"
    HIGH_VARIANCE = "HIGH_VARIANCE"
    SPIKE = "SPIKE"

    @property
    def fail_stop(self) -> bool:
        return self in (FaultKind.POWER, FaultKind.COMMUNICATION, FaultKind.CRITICAL_ERROR)


class Fixability(Enum):
    SOFT_FIXABLE = "SOFT_FIXABLE"
    HARD_FIXABLE = "HARD_FIXABLE"
    UNFIXABLE = "UNFIXABLE"


class ParseError(Exception):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DanglingRemoval(ParseError):
    pass


@dataclass
class FaultSpec:
    start_tick: int
    device: str
    kind: FaultKind
    fixability: Fixability
    param: float = 0.0
    end_tick: Optional[int] = None

    def __post_init__(self):
        if self.end_tick is not None and self.end_tick <= self.start_tick:
            raise ValueError("end_tick must be greater than start_tick")


@dataclass
class ActiveFault:
    spec: FaultSpec
    start_tick: int

    @property
    def kind(self) -> FaultKind:
        return self.spec.kind

    @property
    def param(self) -> float:
        return self.spec.param

    @property
    def fixability(self) -> Fixability:
        return self.spec.fixability


@dataclass
class FaultReport:
    device: str
    kind: Optional[FaultKind]
    detected_tick: int


def parse_fault_schedule(path, known_devices: Optional[Iterable[str]] = None) -> list[FaultSpec]:
    """Read a 5-field CSV fault schedule: tick,device,kind,fixability,value.

    A NO_FAULT row closes the most recent open fault on that device. The
    4-field legacy tuple form (tick,device,fixability,value) is accepted and
    interpreted as a stuck-at fault.
    """
    known = set(known_devices) if known_devices is not None else None
    specs: list[FaultSpec] = []
    open_by_device: dict[str, FaultSpec] = {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            row = [f.strip() for f in row]
            if not row or (len(row) == 1 and not row[0]) or row[0].startswith("#"):
                continue
            if len(row) == 4:
                # legacy tuple: (tick, device, fixability-or-NO_FAULT, value)
                tick_s, device, third, value_s = row
                kind_s = "NO_FAULT" if third.upper() == "NO_FAULT" else "STUCK_AT"
                fix_s = third
            elif len(row) == 5:
                tick_s, device, kind_s, fix_s, value_s = row
            else:
                raise ParseError(f"expected 4 or 5 fields, got {len(row)}", lineno)
            try:
                tick = int(tick_s)
            except ValueError:
                raise ParseError(f"bad tick {tick_s!r}", lineno) from None
            if known is not None and device not in known:
                raise ParseError(f"unknown device {device!r}", lineno)
            if kind_s.upper() == "NO_FAULT":
                open_fault = open_by_device.pop(device, None)
                if open_fault is None:
                    raise DanglingRemoval(f"NO_FAULT with no open fault on {device!r}", lineno)
                open_fault.end_tick = tick
                continue
            try:
                kind = FaultKind(kind_s.upper())
            except ValueError:
                raise ParseError(f"unknown fault kind {kind_s!r}", lineno) from None
            try:
                fixability = Fixability(fix_s.upper())
            except ValueError:
                raise ParseError(f"unknown fixability {fix_s!r}", lineno) from None
            try:
                param = float(value_s)
            except ValueError:
                raise ParseError(f"bad value {value_s!r}", lineno) from None
            spec = FaultSpec(tick, device, kind, fixability, param)
            specs.append(spec)
            open_by_device[device] = spec
    specs.sort(key=lambda s: (s.start_tick, s.device))
    return specs


def write_fault_schedule(path, specs: list[FaultSpec]) -> None:
    rows = []
    for s in specs:
        rows.append((s.start_tick, s.device, s.kind.value, s.fixability.value, s.param))
        if s.end_tick is not None:
            rows.append((s.end_tick, s.device, "NO_FAULT", "-", 0))
    rows.sort(key=lambda r: (r[0], str(r[1])))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in rows:
            writer.writerow(row)


class FaultTable:
    """Active faults by device, advanced once per tick by the simulation."""

    def __init__(self, schedule: Optional[list[FaultSpec]] = None):
        self.schedule = sorted(schedule or [], key=lambda s: (s.start_tick, s.device))
        self.active: dict[str, ActiveFault] = {}
        self.repaired: set[tuple[str, int]] = set()  # (device, start) cleared by handling
        self._cursor = 0

    def advance(self, tick: int) -> list[ActiveFault]:
        """Activate and remove scheduled faults at a tick boundary.

        Returns the faults newly activated at this tick. At most one fault is
        active per device; a later start replaces an earlier one.
        """
        for device, fault in list(self.active.items()):
            if fault.spec.end_tick is not None and fault.spec.end_tick <= tick:
                del self.active[device]
        started = []
        while self._cursor < len(self.schedule) and self.schedule[self._cursor].start_tick <= tick:
            spec = self.schedule[self._cursor]
            self._cursor += 1
            if spec.start_tick == tick and (spec.device, spec.start_tick) not in self.repaired:
                if spec.end_tick is not None and spec.end_tick <= tick:
                    continue
                fault = ActiveFault(spec, spec.start_tick)
                self.active[spec.device] = fault
                started.append(fault)
        return started

    def get(self, device: str) -> Optional[ActiveFault]:
        return self.active.get(device)

    def clear(self, device: str) -> None:
        """Remove a fault repaired by handling so it never re-activates."""
        fault = self.active.pop(device, None)
        if fault is not None:
            self.repaired.add((device, fault.spec.start_tick))


def transform_reading(true_value: float, fault: ActiveFault, tick: int, domain,
                      spike_rise_ticks: int = 10):
    """Observed value for a faulted device, or None when unresponsive.

    Pure in (true_value, fault, tick offset); the simulation replays it
    deterministically. Values are clamped to the device's domain.
    """
    kind = fault.kind
    if kind.fail_stop:
        return None
    offset = tick - fault.start_tick
    if kind is FaultKind.STUCK_AT:
        return domain.clamp(fault.param)
    if kind is FaultKind.OUTLIER:
        return domain.clamp(fault.param) if offset == 0 else true_value
    if kind is FaultKind.SPIKE and not domain.binary:
        period = 2 * spike_rise_ticks
        phase = offset % period
        tri = phase / spike_rise_ticks if phase <= spike_rise_ticks else 2 - phase / spike_rise_ticks
        return domain.clamp(true_value + fault.param * tri)
    # HIGH_VARIANCE, and SPIKE on binary devices
    if domain.binary:
        flipped = 1.0 - float(true_value)
        return flipped if offset % 2 == 0 else float(true_value)
    amplitude = fault.param
    sign = 1.0 if offset % 2 == 0 else -1.0
    return domain.clamp(true_value + sign * amplitude)


class PerfectOracle:
    """Reference fault identifier: reports every fault exactly, with a fixed delay.

    Any object with the same ``poll``/``is_faulty`` surface can replace it.
    """

    def __init__(self, table: FaultTable, delay: int = 0):
        self.table = table
        self.delay = delay
        self._reported: set[tuple[str, int]] = set()

    def poll(self, tick: int) -> list[FaultReport]:
        reports = []
        for device in sorted(self.table.active):
            fault = self.table.active[device]
            key = (device, fault.start_tick)
            if tick >= fault.start_tick + self.delay and key not in self._reported:
                self._reported.add(key)
                reports.append(FaultReport(device, fault.kind, tick))
        return reports

    def is_faulty(self, device: str) -> bool:
        return device in self.table.active

    def fault_free_window(self, device: str, start_tick: int, end_tick: int) -> bool:
        """Certify that no fault was active on the device across a tick window."""
        fault = self.table.get(device)
        if fault is not None and fault.start_tick <= end_tick:
            return False
        return True

    def any_fault(self) -> bool:
        return bool(self.table.active)


@dataclass
class ScheduleProfile:
    """Knobs for random benchmark schedule generation."""

    fault_count: int = 20
    min_duration: int = 800
    max_duration: int = 2500
    overlap: bool = False
    failstop_fraction: float = 0.15


def generate_schedule(seed: int, ticks: int, devices: dict, profile: ScheduleProfile) -> list[FaultSpec]:
    """Random fault schedule over registered devices within the profile's distributions.

    Devices are covered evenly; non-fail-stop faults alternate soft/hard
    fixable; fail-stop faults are unfixable.
    """
    rng = random.Random(seed)
    ids = sorted(devices)
    specs: list[FaultSpec] = []
    n_failstop = round(profile.fault_count * profile.failstop_fraction)
    kinds_fs = [FaultKind.POWER, FaultKind.COMMUNICATION, FaultKind.CRITICAL_ERROR]
    kinds_nfs = [FaultKind.STUCK_AT, FaultKind.HIGH_VARIANCE, FaultKind.OUTLIER, FaultKind.SPIKE]
    fix_cycle = [Fixability.SOFT_FIXABLE, Fixability.HARD_FIXABLE]
    if profile.overlap:
        starts = sorted(rng.randrange(100, max(101, ticks - profile.max_duration)) for _ in range(profile.fault_count))
    else:
        slot = max(1, (ticks - 200) // profile.fault_count)
        starts = [100 + i * slot for i in range(profile.fault_count)]
    last_end = 0
    for i, start in enumerate(starts):
        device = ids[i % len(ids)]
        spec_dev = devices[device]
        duration = rng.randrange(profile.min_duration, profile.max_duration + 1)
        if not profile.overlap:
            start = max(start, last_end + 10)
        end = min(start + duration, ticks - 1)
        if end <= start:
            continue
        if i < n_failstop:
            kind = kinds_fs[i % len(kinds_fs)]
            fixability = Fixability.UNFIXABLE
            param = 0.0
        else:
            kind = kinds_nfs[i % len(kinds_nfs)]
            fixability = fix_cycle[i % 2]
            if spec_dev.value_domain.binary:
                param = float(rng.randrange(2))
                if kind is FaultKind.SPIKE:
                    kind = FaultKind.HIGH_VARIANCE
            elif kind in (FaultKind.STUCK_AT, FaultKind.OUTLIER):
                lo, hi = spec_dev.value_domain.lo, spec_dev.value_domain.hi
                param = round(rng.uniform(lo, hi), 1)
            else:
                param = 10.0
        specs.append(FaultSpec(start, device, kind, fixability, param, end_tick=end))
        last_end = end if not profile.overlap else last_end
    specs.sort(key=lambda s: (s.start_tick, s.device))
    return specs
