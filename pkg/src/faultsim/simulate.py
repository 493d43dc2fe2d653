"""Trace generation, the four-mode simulation loop, and run metrics."""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from . import checkpoint as cp
from .apps import AppEngine, Event, builtin_apps
from .config import ConfigFile, init_config
from .devices import (ActuationResult, DeviceKind, Health, Registry,
                      SuppressedDevice, Unresponsive, default_home,
                      notification_sink)
from .faults import FaultSpec, FaultTable, PerfectOracle
from .handler import AutoHandler
from .handling import (NotificationLog, release_apps_for, suppress_apps_for,
                       suppress_device, unsuppress_device)

SECONDS_PER_DAY = 86400


# -- environment traces ----------------------------------------------------

@dataclass
class EnvironmentTrace:
    ticks: int
    seed: int
    streams: dict[str, list[float]]

    def value(self, device: str, tick: int) -> float:
        stream = self.streams.get(device)
        if stream is None:
            return 0.0
        return stream[min(tick, len(stream) - 1)]


def _dwell_stream(rng: random.Random, ticks: int, mean_on: float, mean_off: float,
                  gate=None) -> list[float]:
    """Binary stream with exponential dwell times; optional per-tick gate."""
    values = []
    state = 0.0
    remaining = 0
    while len(values) < ticks:
        if remaining <= 0:
            state = 1.0 - state
            mean = mean_on if state == 1.0 else mean_off
            remaining = max(1, int(rng.expovariate(1.0 / mean)))
        t = len(values)
        if gate is not None and not gate(t):
            values.append(0.0)
            remaining -= 1
        else:
            values.append(state)
            remaining -= 1
    return values


def _pulse_stream(rng: random.Random, ticks: int, mean_interval: float,
                  min_len: int, max_len: int) -> list[float]:
    values = [0.0] * ticks
    t = int(rng.expovariate(1.0 / mean_interval))
    while t < ticks:
        length = rng.randint(min_len, max_len)
        for i in range(t, min(ticks, t + length)):
            values[i] = 1.0
        t += length + int(rng.expovariate(1.0 / mean_interval))
    return values


def generate_trace(seed: int, ticks: int) -> EnvironmentTrace:
    """Correlated ground-truth sensor streams for the default home.

    Motion only fires while the occupant is home, so the motion and presence
    streams carry the correlation that history-based rollback exploits; the
    temperature follows a diurnal curve crossing both comfort thresholds.
    """
    if ticks <= 0:
        raise ValueError("ticks must be positive")
    presence = []
    r_pres = random.Random(seed * 1000 + 1)
    day = -1
    depart = arrive = 0
    for t in range(ticks):
        if t // SECONDS_PER_DAY != day:
            day = t // SECONDS_PER_DAY
            depart = 9 * 3600 + r_pres.randint(-1800, 1800)
            arrive = 17 * 3600 + r_pres.randint(-1800, 1800)
        tod = t % SECONDS_PER_DAY
        presence.append(0.0 if depart <= tod < arrive else 1.0)

    r_motion = random.Random(seed * 1000 + 2)
    motion = _dwell_stream(r_motion, ticks, mean_on=180, mean_off=120,
                           gate=lambda t: presence[t] == 1.0)

    r_temp = random.Random(seed * 1000 + 3)
    temperature = []
    noise = 0.0
    for t in range(ticks):
        tod = t % SECONDS_PER_DAY
        base = 75.0 + 8.0 * math.sin(2 * math.pi * (tod - 21600) / SECONDS_PER_DAY)
        noise = 0.999 * noise + r_temp.gauss(0.0, 0.05)
        temperature.append(float(round(base + noise)))

    r_contact = random.Random(seed * 1000 + 4)
    contact = _pulse_stream(r_contact, ticks, mean_interval=4000, min_len=10, max_len=60)
    r_smoke = random.Random(seed * 1000 + 5)
    smoke = _pulse_stream(r_smoke, ticks, mean_interval=20000, min_len=30, max_len=90)
    r_leak = random.Random(seed * 1000 + 6)
    leak = _pulse_stream(r_leak, ticks, mean_interval=25000, min_len=60, max_len=120)

    return EnvironmentTrace(ticks, seed, {
        "motion": motion, "contact": contact, "temperature": temperature,
        "presence": presence, "smoke": smoke, "smoke_rep": list(smoke),
        "leak": leak,
    })


def save_trace(trace: EnvironmentTrace, path) -> None:
    names = sorted(trace.streams)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tick"] + names + [f"#seed={trace.seed}"])
        for t in range(trace.ticks):
            writer.writerow([t] + [format(trace.streams[n][t], "g") for n in names])


def load_trace(path) -> EnvironmentTrace:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        seed = 0
        names = []
        for col in header[1:]:
            if col.startswith("#seed="):
                seed = int(col[len("#seed="):])
            else:
                names.append(col)
        streams: dict[str, list[float]] = {n: [] for n in names}
        ticks = 0
        for row in reader:
            for name, cell in zip(names, row[1:]):
                streams[name].append(float(cell))
            ticks += 1
    return EnvironmentTrace(ticks, seed, streams)


# -- run modes and metrics -------------------------------------------------

class RunMode(Enum):
    BASELINE = "a"
    NO_HANDLER = "b"
    SUPPRESSION_ONLY = "c"
    FULL_HANDLER = "d"


@dataclass
class RunMetrics:
    mode: str
    scheme: str = ""
    ticks: int = 0
    incorrect_states: int = 0
    handler_caused_incorrect: int = 0
    events: int = 0
    events_suppressed: int = 0
    actuations: int = 0
    restarts: int = 0
    energy_mj: float = 0.0
    rollbacks_attempted: int = 0
    rollbacks_succeeded: int = 0
    rollback_actuations: int = 0
    event_counts: dict = field(default_factory=dict)
    actuation_counts: dict = field(default_factory=dict)
    restart_counts: dict = field(default_factory=dict)  # device -> {soft, hard}


@dataclass
class DeviceObservation:
    value: float
    responsive: bool


class Simulation:
    """One sequential run of the per-tick pipeline.

    Also serves as the environment object handed to handling-library
    generators (``tick``, ``registry``, ``config``, ``oracle``, ``engine``,
    ``checkpoint_log``, ``notifications``, restart/rollback counters).
    """

    MAX_CASCADE_DEPTH = 8

    def __init__(self, trace: EnvironmentTrace, mode: RunMode,
                 schedule: Optional[list[FaultSpec]] = None,
                 config: Optional[ConfigFile] = None,
                 registry: Optional[Registry] = None,
                 apps=None, scheme: str = "conservative",
                 oracle_delay: int = 0,
                 notification_path=None):
        self.trace = trace
        self.mode = mode
        self.scheme = scheme
        self.registry = registry if registry is not None else Registry(
            default_home() + [notification_sink()])
        self.registry.sensor_truth = lambda dev, tick: trace.value(dev, tick)
        self.registry.fault_table = FaultTable(
            [] if mode is RunMode.BASELINE else list(schedule or []))
        self.oracle = PerfectOracle(self.registry.fault_table, delay=oracle_delay)
        self.config = config if config is not None else init_config(self.registry)
        if mode is RunMode.FULL_HANDLER:
            for dc in self.config.devices.values():
                dc.scheme = scheme
        self.engine = AppEngine(apps if apps is not None else builtin_apps(), self.registry)
        tolerances = {d: self.config.general.sensor_match_tolerance
                      for d, s in self.registry.devices.items()
                      if not s.value_domain.binary}
        self.checkpoint_log = cp.CheckpointLog(tolerances)
        self.notifications = NotificationLog(notification_path)
        self.handler = AutoHandler(self) if mode is RunMode.FULL_HANDLER else None
        self.tick = 0
        self.metrics = RunMetrics(mode=mode.value, scheme=scheme if mode is RunMode.FULL_HANDLER else "")
        self.history: dict[str, list[DeviceObservation]] = {
            d: [] for d in sorted(self.registry.devices)}
        self._suppression_tracked: set[str] = set()
        self._shadow: dict[str, float] = {d: s.value for d, s in self.registry.live_values.items()}

    # environment surface used by handling generators
    def count_restart(self, device: str, kind: str) -> None:
        per = self.metrics.restart_counts.setdefault(device, {"soft": 0, "hard": 0})
        per[kind] += 1
        self.metrics.restarts += 1

    def count_rollback(self, result: cp.RollbackResult) -> None:
        self.metrics.rollbacks_attempted += 1
        if result.success:
            self.metrics.rollbacks_succeeded += 1
            self.metrics.rollback_actuations += result.actuations

    # -- driver ------------------------------------------------------------

    def run(self, ticks: Optional[int] = None) -> tuple[RunMetrics, dict]:
        end = ticks if ticks is not None else self.trace.ticks
        for _ in range(end):
            self.step()
        self.metrics.ticks = end
        return self.metrics, self.history

    def step(self) -> None:
        tick = self.tick
        registry = self.registry
        for dev_id, spec in registry.devices.items():
            if spec.momentary:
                registry._commanded[dev_id] = 0.0
                registry.live_values[dev_id].value = 0.0
        registry.fault_table.advance(tick)
        if self.mode in (RunMode.SUPPRESSION_ONLY, RunMode.FULL_HANDLER):
            reports = self.oracle.poll(tick)
            if self.handler is not None:
                for report in reports:
                    self.handler.report(report)
                self.handler.restore_if_repaired()
                self.handler.step_all()
            else:
                for report in reports:
                    suppress_device(registry, report.device)
                    suppress_apps_for(report.device, self.engine, self.config)
                    self._suppression_tracked.add(report.device)
                for device in sorted(self._suppression_tracked):
                    if not self.oracle.is_faulty(device):
                        unsuppress_device(registry, device)
                        release_apps_for(device, self.engine)
                        self._suppression_tracked.discard(device)

        snapshot = registry.snapshot(tick)
        commands = self.engine.clock_commands(tick, snapshot)

        events = []
        for dev_id in sorted(registry.devices):
            spec = registry.devices[dev_id]
            prev = registry.live_values[dev_id].value
            state = registry.read_device(dev_id, tick)
            if state.health is Health.SUPPRESSED:
                obs = self._observe(dev_id, tick)
                if obs.value != self._shadow.get(dev_id):
                    self.metrics.events_suppressed += 1
                self._shadow[dev_id] = obs.value
                continue
            self._shadow[dev_id] = state.value
            if state.value != prev and not spec.momentary:
                events.append(Event(dev_id, prev, state.value, tick))
                self.metrics.events += 1
                self.metrics.event_counts[dev_id] = self.metrics.event_counts.get(dev_id, 0) + 1

        snapshot = registry.snapshot(tick)
        for event in events:
            commands.extend(self.engine.dispatch(event, snapshot))
        self._execute(commands, depth=0)

        self.checkpoint_log.process_pending(
            tick, self.config.general.identification_upper_bound, self.oracle)
        if tick % 1000 == 999:
            self.checkpoint_log.evict_stale(tick, self.config.general.checkpoint_ttl)

        for dev_id in sorted(registry.devices):
            self.history[dev_id].append(self._observe(dev_id, tick))
        self.tick += 1

    def _execute(self, commands, depth: int) -> None:
        if not commands or depth >= self.MAX_CASCADE_DEPTH:
            return
        registry = self.registry
        tick = self.tick
        new_events = []
        for cmd in commands:
            target = registry.redirects.get(cmd.device, cmd.device)
            spec = registry.devices.get(target)
            if spec is None:
                continue
            old = registry._commanded.get(target)
            if old == cmd.value:
                continue
            try:
                result = registry.actuate(cmd.device, cmd.value, tick)
            except (SuppressedDevice, Unresponsive):
                continue
            if result is not ActuationResult.SUCCESS:
                continue
            registry.live_values[target].value = cmd.value
            self.metrics.actuations += 1
            self.metrics.actuation_counts[target] = self.metrics.actuation_counts.get(target, 0) + 1
            if not spec.momentary:
                new_events.append(Event(target, old, cmd.value, tick))
            if self.mode in (RunMode.SUPPRESSION_ONLY, RunMode.FULL_HANDLER):
                snap = registry.snapshot(tick)
                if (not self.oracle.any_fault()
                        and not self.engine.does_actuation_cascade(target, cmd.value,
                                                                   _with_old(snap, target, old))):
                    self.checkpoint_log.take(snap)
        if new_events:
            snapshot = registry.snapshot(tick)
            next_commands = []
            for event in new_events:
                self.metrics.events += 1
                self.metrics.event_counts[event.device] = self.metrics.event_counts.get(event.device, 0) + 1
                next_commands.extend(self.engine.dispatch(event, snapshot))
            self._execute(next_commands, depth + 1)

    def _observe(self, dev_id: str, tick: int) -> DeviceObservation:
        """Physical/reported state for metrics, independent of suppression."""
        registry = self.registry
        spec = registry.devices[dev_id]
        fault = registry.fault_table.get(dev_id)
        if fault is not None and fault.kind.fail_stop:
            return DeviceObservation(registry.live_values[dev_id].value, False)
        if spec.kind is DeviceKind.SENSOR:
            true_value = self.trace.value(dev_id, tick)
        else:
            true_value = registry._commanded[dev_id]
        if fault is None:
            return DeviceObservation(spec.value_domain.clamp(true_value), True)
        if spec.kind is DeviceKind.SENSOR and dev_id in registry.overrides:
            return DeviceObservation(registry.overrides[dev_id], True)
        from .faults import transform_reading
        value = transform_reading(true_value, fault, tick, spec.value_domain)
        return DeviceObservation(value, True)

    # -- direct driving of handling generators (developer API) -------------

    def run_handler(self, gen, max_ticks: int = 100000):
        """Advance the simulation tick-by-tick until a handling generator
        finishes; returns its result."""
        while True:
            try:
                next(gen)
            except StopIteration as stop:
                return stop.value
            self.step()
            if self.tick >= max_ticks:
                raise RuntimeError("handler did not finish")


def _with_old(snapshot, device, old_value):
    actuators = dict(snapshot.actuator_states)
    if device in actuators:
        actuators[device] = old_value
    return type(snapshot)(snapshot.sensor_states, actuators, snapshot.tick)


# -- comparison metrics ----------------------------------------------------

class ShapeMismatch(ValueError):
    pass


def count_incorrect_states(run_history: dict, baseline_history: dict,
                           nohandler_history: Optional[dict] = None) -> tuple[int, int]:
    """Sum of (device, tick) pairs whose state differs from the faultless run.

    An unresponsive device counts as incorrect unless the baseline was also
    unresponsive at that tick. When the no-handler history is supplied, the
    second element attributes the pairs that are incorrect here but correct
    without a handler.
    """
    if set(run_history) != set(baseline_history):
        raise ShapeMismatch("device sets differ")
    incorrect = 0
    handler_caused = 0
    for device in run_history:
        run_states = run_history[device]
        base_states = baseline_history[device]
        if len(run_states) != len(base_states):
            raise ShapeMismatch(f"tick counts differ for {device}")
        nh_states = nohandler_history.get(device) if nohandler_history else None
        for t, (obs, base) in enumerate(zip(run_states, base_states)):
            wrong = (obs.value != base.value) or (not obs.responsive and base.responsive)
            if not wrong:
                continue
            incorrect += 1
            if nh_states is not None:
                nh = nh_states[t]
                nh_wrong = (nh.value != base.value) or (not nh.responsive and base.responsive)
                if not nh_wrong:
                    handler_caused += 1
    return incorrect, handler_caused


def incorrect_per_device(run_history: dict, baseline_history: dict) -> dict:
    out = {}
    for device in run_history:
        count = 0
        for obs, base in zip(run_history[device], baseline_history[device]):
            if obs.value != base.value or (not obs.responsive and base.responsive):
                count += 1
        out[device] = count
    return out


@dataclass
class EnergyCostModel:
    actuation_duration_ms: float = 1000.0
    soft_restart_ms: Optional[float] = None   # None: use each device's spec
    hard_restart_ms: Optional[float] = None


def compute_energy(metrics: RunMetrics, specs: dict,
                   cost_model: Optional[EnergyCostModel] = None) -> float:
    """Modeled energy in millijoules from events, actuations, and restarts."""
    cm = cost_model or EnergyCostModel()
    energy_uj = 0.0  # microjoules: mW * ms
    for device, count in metrics.event_counts.items():
        spec = specs[device]
        energy_uj += count * spec.power_mw * spec.read_latency_ms
    for device, count in metrics.actuation_counts.items():
        spec = specs[device]
        energy_uj += count * spec.power_mw * cm.actuation_duration_ms
    for device, per in metrics.restart_counts.items():
        spec = specs[device]
        soft_ms = cm.soft_restart_ms if cm.soft_restart_ms is not None else spec.soft_restart_ms
        hard_ms = cm.hard_restart_ms if cm.hard_restart_ms is not None else spec.hard_restart_ms
        energy_uj += per["soft"] * spec.power_mw * soft_ms
        energy_uj += per["hard"] * spec.power_mw * hard_ms
    return energy_uj / 1000.0


def run_simulation(trace: EnvironmentTrace, mode: RunMode,
                   schedule: Optional[list[FaultSpec]] = None,
                   config: Optional[ConfigFile] = None,
                   scheme: str = "conservative",
                   apps=None, registry: Optional[Registry] = None,
                   notification_path=None) -> tuple[RunMetrics, dict]:
    """Execute a full run and fill in the energy figure."""
    sim = Simulation(trace, mode, schedule=schedule, config=config,
                     scheme=scheme, apps=apps, registry=registry,
                     notification_path=notification_path)
    metrics, history = sim.run()
    metrics.energy_mj = compute_energy(metrics, sim.registry.devices)
    return metrics, history
