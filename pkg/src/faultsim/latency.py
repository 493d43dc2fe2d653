"""Analytic timing model for handling functions and schemes.

Timings are derived from operation counts against a hub cost model, the way
one would read them off device datasheets, not wall-clock measured.
"""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass
from typing import Optional

from .devices import DeviceKind, DeviceSpec
from .faults import FaultKind
from .schemes import BUILTIN_SCHEMES, Scheme, Step


@dataclass
class CostModel:
    cpu_op_ms: float = 0.001
    device_command_ms: float = 6.0
    retry_max_ms: float = 30000.0
    identification_bound_ms: float = 0.0
    restart_attempts: int = 3
    transient_durations_ms: tuple = (100.0, 300.0, 500.0, 700.0, 900.0)
    rollback_actuation_counts: tuple = (0, 1, 2, 3, 4)
    checkpoint_entries: int = 20

    @classmethod
    def load(cls, path) -> "CostModel":
        with open(path) as fh:
            data = json.load(fh)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown cost model fields: {sorted(unknown)}")
        for key in ("transient_durations_ms", "rollback_actuation_counts"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


@dataclass
class TimingStats:
    mean_ms: float
    stddev_ms: float

    @property
    def coefficient_of_variation(self) -> float:
        return self.stddev_ms / self.mean_ms if self.mean_ms else 0.0


def _stats(samples: list[float]) -> TimingStats:
    mean = statistics.fmean(samples)
    stddev = statistics.pstdev(samples) if len(samples) > 1 else 0.0
    return TimingStats(mean, stddev)


NON_FAIL_STOP = [k for k in FaultKind if not k.fail_stop]
FAIL_STOP = [k for k in FaultKind if k.fail_stop]
_PROFILES = ("transient", "permanent")


def _restart_scenarios(devices: list[DeviceSpec], cm: CostModel, soft: bool) -> list[float]:
    samples = []
    for spec in devices:
        supported = spec.supports_soft_restart if soft else spec.supports_hard_restart
        if not supported:
            continue
        duration = spec.soft_restart_ms if soft else spec.hard_restart_ms
        for kind in FaultKind:
            if kind.fail_stop:
                # never acknowledged: one command per attempt, then abort
                samples.append(cm.restart_attempts * cm.device_command_ms
                               + 2 * cm.cpu_op_ms)
            else:
                samples.append(cm.device_command_ms + duration
                               + spec.read_latency_ms + cm.identification_bound_ms
                               + 2 * cm.cpu_op_ms)
    return samples


def function_timings(devices: list[DeviceSpec], cm: Optional[CostModel] = None) -> dict:
    """Mean/stddev per handling function across devices, parameters, and fault types."""
    cm = cm or CostModel()
    devices = [d for d in devices]
    n_devices = len(devices)

    samples: dict[str, list[float]] = {}
    samples["replicate"] = [8 * cm.cpu_op_ms] * max(1, n_devices)
    samples["checkpoint"] = [(5 + 2 * n_devices) * cm.cpu_op_ms] * max(1, n_devices)
    # notification cost scales with how many triggers are configured
    samples["notify"] = [(2 + (i % 3 + 1)) * cm.cpu_op_ms
                         for i in range(max(1, n_devices))]

    retry = []
    for spec in devices:
        for kind in FaultKind:
            # equal mix of short transient faults and permanent timeouts
            for duration in cm.transient_durations_ms:
                # the fault clears on its own; retry confirms with a read
                retry.append(duration + spec.read_latency_ms + 2 * cm.cpu_op_ms)
                retry.append(cm.retry_max_ms + cm.identification_bound_ms
                             + spec.read_latency_ms + 2 * cm.cpu_op_ms)
    samples["retry"] = retry

    samples["software_restart"] = _restart_scenarios(devices, cm, soft=True)
    samples["hardware_restart"] = _restart_scenarios(devices, cm, soft=False)

    scan_ms = cm.checkpoint_entries * n_devices * cm.cpu_op_ms
    samples["rollback"] = [scan_ms + n * cm.device_command_ms
                           for n in cm.rollback_actuation_counts]
    samples["transaction"] = []
    for n in (1, 2, 3):
        for spec in devices:
            if spec.kind is DeviceKind.ACTUATOR:
                samples["transaction"].append(
                    n * (cm.device_command_ms + spec.read_latency_ms) + 2 * cm.cpu_op_ms)

    return {name: _stats(vals) for name, vals in samples.items() if vals}


@dataclass
class SchemeTiming:
    scheme: str
    fault_kind: FaultKind
    mean_handle_ms: float
    rollback_ms: float
    repairable: bool


def _step_cost(step: Step, spec: DeviceSpec, kind: FaultKind, fixability: str,
               profile: str, cm: CostModel) -> tuple[float, bool]:
    """(time spent, fault repaired at this step)."""
    fail_stop = kind.fail_stop
    if step is Step.REPLICATE:
        return 8 * cm.cpu_op_ms, False  # no replica configured in the model
    if step is Step.RETRY:
        if profile == "transient" and not fail_stop:
            duration = statistics.fmean(cm.transient_durations_ms)
            return duration + spec.read_latency_ms, True
        return cm.retry_max_ms + cm.identification_bound_ms + spec.read_latency_ms, False
    if step is Step.SOFT_RESTART:
        if not spec.supports_soft_restart:
            return 0.0, False
        if fail_stop:
            return cm.restart_attempts * cm.device_command_ms, False
        repaired = fixability == "soft"
        return (cm.device_command_ms + spec.soft_restart_ms
                + spec.read_latency_ms + cm.identification_bound_ms), repaired
    if step is Step.HARD_RESTART:
        if not spec.supports_hard_restart:
            return 0.0, False
        if fail_stop:
            return cm.restart_attempts * cm.device_command_ms, False
        repaired = fixability == "hard"
        return (cm.device_command_ms + spec.hard_restart_ms
                + spec.read_latency_ms + cm.identification_bound_ms), repaired
    if step is Step.ROLLBACK:
        n = statistics.fmean(cm.rollback_actuation_counts)
        return n * cm.device_command_ms, False
    if step is Step.NOTIFY:
        return 3 * cm.cpu_op_ms, False
    return 0.0, False


def scheme_timings(devices: list[DeviceSpec],
                   cm: Optional[CostModel] = None,
                   schemes: Optional[dict[str, Scheme]] = None) -> list[SchemeTiming]:
    """Mean handle time per (scheme, fault kind), rollback time per scheme,
    and whether handling can repair the kind at all."""
    cm = cm or CostModel()
    schemes = schemes or BUILTIN_SCHEMES
    out = []
    for name, scheme in sorted(schemes.items()):
        for kind in FaultKind:
            totals = []
            rollback_times = []
            fixabilities = ("soft", "hard") if not kind.fail_stop else ("none",)
            profiles = _PROFILES if not kind.fail_stop else ("permanent",)
            for spec in devices:
                for fixability in fixabilities:
                    for profile in profiles:
                        total = 0.0
                        rb = 0.0
                        for step in scheme.steps:
                            cost, repaired = _step_cost(step, spec, kind, fixability,
                                                        profile, cm)
                            total += cost
                            if step is Step.ROLLBACK:
                                rb = cost
                            if repaired:
                                break
                        totals.append(total)
                        rollback_times.append(rb)
            out.append(SchemeTiming(
                scheme=name, fault_kind=kind,
                mean_handle_ms=statistics.fmean(totals),
                rollback_ms=statistics.fmean(rollback_times),
                repairable=not kind.fail_stop))
    return out
