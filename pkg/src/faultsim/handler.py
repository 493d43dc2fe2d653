"""Automated fault handler: sessions, scheme execution, redundancy detection."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from . import checkpoint as cp
from .config import ConfigFile, NotifyTrigger
from .devices import DeviceKind, Registry
from .faults import FaultReport
from .handling import (RetryOutcome, activate_redundant_device,
                       device_hardware_restart, device_software_restart,
                       notify_user, release_apps_for, retry, suppress_apps_for,
                       suppress_device, unsuppress_device)
from .schemes import BUILTIN_SCHEMES, Scheme, Step


class SessionOutcome(Enum):
    IN_PROGRESS = "in_progress"
    REPAIRED = "repaired"
    UNREPAIRED = "unrepaired"


class DuplicateSession(RuntimeError):
    pass


@dataclass
class HandlerSession:
    device: str
    report: FaultReport
    scheme: Scheme
    started_tick: int
    step_index: int = 0
    outcome: SessionOutcome = SessionOutcome.IN_PROGRESS
    executed_steps: list[Step] = field(default_factory=list)
    rollback_result: Optional[cp.RollbackResult] = None
    _gen: Optional[object] = None


class AutoHandler:
    """Consumes fault reports and runs each device's configured scheme.

    One session per device at a time; sessions advance once per simulation
    tick through their generators.
    """

    def __init__(self, env):
        self.env = env
        self.sessions: dict[str, HandlerSession] = {}
        self.finished: list[HandlerSession] = []

    def on_fault_detected(self, report: FaultReport) -> HandlerSession:
        device = report.device
        if device in self.sessions:
            raise DuplicateSession(device)
        scheme_name = self.env.config.device(device).scheme
        scheme = BUILTIN_SCHEMES[scheme_name]
        session = HandlerSession(device, report, scheme, self.env.tick)
        suppress_device(self.env.registry, device)
        suppress_apps_for(device, self.env.engine, self.env.config)
        notify_user(self.env, device, NotifyTrigger.OCCURRED, report.kind)
        session._gen = self._run_session(session)
        self.sessions[device] = session
        return session

    def report(self, report: FaultReport) -> None:
        """Entry point from the oracle; coalesces reports on open sessions."""
        if report.device in self.sessions:
            return
        self.on_fault_detected(report)

    def step_all(self) -> None:
        for device in sorted(self.sessions):
            session = self.sessions.get(device)
            if session is None:
                continue
            try:
                next(session._gen)
            except StopIteration:
                self._finish(session)

    def _finish(self, session: HandlerSession) -> None:
        self.sessions.pop(session.device, None)
        self.finished.append(session)

    def _run_session(self, session: HandlerSession):
        env = self.env
        device = session.device
        for step in session.scheme.steps:
            session.step_index += 1
            repaired = False
            if step is Step.REPLICATE:
                session.executed_steps.append(step)
                if activate_redundant_device(device, env.config, env.registry):
                    # device still faulty; polls flow through the replica
                    unsuppress_device(env.registry, device)
                    release_apps_for(device, env.engine)
                    session.outcome = SessionOutcome.REPAIRED
                    notify_user(env, device, NotifyTrigger.REPAIRED, session.report.kind)
                    return
            elif step is Step.RETRY:
                session.executed_steps.append(step)
                outcome = yield from retry(env, device)
                repaired = outcome is RetryOutcome.RESOLVED
            elif step is Step.SOFT_RESTART:
                if env.registry.devices[device].supports_soft_restart:
                    session.executed_steps.append(step)
                    repaired = yield from device_software_restart(env, device)
            elif step is Step.HARD_RESTART:
                if env.registry.devices[device].supports_hard_restart:
                    session.executed_steps.append(step)
                    repaired = yield from device_hardware_restart(env, device)
            elif step is Step.ROLLBACK:
                strategy = env.config.device(device).rollback_strategy
                if strategy is not cp.RollbackStrategy.DISABLED:
                    session.executed_steps.append(step)
                    session.rollback_result = cp.rollback(
                        device, env.checkpoint_log, env.registry, strategy, env.tick)
                    env.count_rollback(session.rollback_result)
                # mitigation only: continue unless the fault itself cleared
                repaired = env.registry.fault_table.get(device) is None
            elif step is Step.NOTIFY:
                session.executed_steps.append(step)
                session.outcome = SessionOutcome.UNREPAIRED
                notify_user(env, device, NotifyTrigger.UNREPAIRED, session.report.kind)
                return
            if repaired:
                self._restore(device)
                session.outcome = SessionOutcome.REPAIRED
                notify_user(env, device, NotifyTrigger.REPAIRED, session.report.kind)
                return
        session.outcome = SessionOutcome.UNREPAIRED
        notify_user(env, device, NotifyTrigger.UNREPAIRED, session.report.kind)

    def _restore(self, device: str) -> None:
        """Suppression bracket exit: return the device to normal execution."""
        env = self.env
        unsuppress_device(env.registry, device)
        release_apps_for(device, env.engine)
        env.registry.remove_redirect(device)
        env.registry.overrides.pop(device, None)

    def restore_if_repaired(self) -> None:
        """Clean up after faults that ended outside a session (transient end,
        or an unrepaired fault removed by the schedule)."""
        registry = self.env.registry
        for device in list(registry.redirects):
            if registry.fault_table.get(device) is None and device not in self.sessions:
                registry.remove_redirect(device)
        for session in self.finished:
            device = session.device
            if device in self.sessions:
                continue
            if registry.fault_table.get(device) is None:
                if device in registry.suppressed:
                    self._restore(device)
                registry.overrides.pop(device, None)


def detect_redundant_devices(history: dict, registry: Registry,
                             config: ConfigFile) -> list[tuple[str, str]]:
    """Find exact-duplicate sensors from their state streams.

    A pair is redundant when per-tick agreement over the detection window
    meets the configured fraction and the per-state transition rates of the
    two streams converge. Detected pairs are written symmetrically into the
    config replica lists, after any manual entries.
    """
    rd = config.general.redundancy_detection
    sensors = [d for d in sorted(history)
               if d in registry.devices and registry.devices[d].kind is DeviceKind.SENSOR]
    pairs = []
    for a, b in itertools.combinations(sensors, 2):
        if registry.devices[a].type_class != registry.devices[b].type_class:
            continue
        sa, sb = history[a], history[b]
        n = min(len(sa), len(sb), rd.window)
        if n < rd.window:
            continue
        sa, sb = sa[-n:], sb[-n:]
        agreement = sum(1 for x, y in zip(sa, sb) if x == y) / n
        if agreement < rd.agreement:
            continue
        if not _transitions_converge(sa, sb, rd.transition_tolerance):
            continue
        pairs.append((a, b))
        for primary, replica in ((a, b), (b, a)):
            dc = config.device(primary)
            if replica not in dc.replicas:
                dc.replicas.append(replica)
    return pairs


def _transitions_converge(sa, sb, tolerance: float) -> bool:
    ra = _change_rates(sa)
    rb = _change_rates(sb)
    states = set(ra) | set(rb)
    return all(abs(ra.get(s, 0.0) - rb.get(s, 0.0)) <= tolerance for s in states)


def _change_rates(stream) -> dict:
    """Per-state empirical change rate: P(next != cur | cur = s)."""
    counts: dict = {}
    changes: dict = {}
    for cur, nxt in zip(stream, stream[1:]):
        counts[cur] = counts.get(cur, 0) + 1
        if nxt != cur:
            changes[cur] = changes.get(cur, 0) + 1
    return {s: changes.get(s, 0) / counts[s] for s in counts}
