"""Trigger-action applications: built-ins, dispatch, and cascade checks."""

from __future__ import annotations

import json
import operator
from dataclasses import dataclass, field
from typing import Optional

from .devices import NOTIFY_SINK_ID, Registry, SystemSnapshot

_OPS = {
    "==": operator.eq, "!=": operator.ne,
    "<": operator.lt, ">": operator.gt,
    "<=": operator.le, ">=": operator.ge,
}

SECONDS_PER_DAY = 86400


@dataclass(frozen=True)
class Condition:
    """Extra predicate over the current snapshot, ANDed with the trigger."""

    device: str
    op: str
    value: float

    def holds(self, snapshot: SystemSnapshot) -> bool:
        states = {**snapshot.sensor_states, **snapshot.actuator_states}
        if self.device not in states:
            return False
        return _OPS[self.op](states[self.device], self.value)


@dataclass(frozen=True)
class Event:
    device: str
    old_value: float
    new_value: float
    tick: int


@dataclass(frozen=True)
class AppRule:
    """Fires on a matching device event (or time of day) when all conditions hold."""

    trigger_device: Optional[str] = None
    trigger_op: str = "=="
    trigger_value: float = 0.0
    clock_time: Optional[int] = None  # seconds past midnight; exclusive with trigger_device
    conditions: tuple[Condition, ...] = ()
    actions: tuple[tuple[str, float], ...] = ()

    def matches_event(self, event: Event, snapshot: SystemSnapshot) -> bool:
        if self.trigger_device is None or event.device != self.trigger_device:
            return False
        if not _OPS[self.trigger_op](event.new_value, self.trigger_value):
            return False
        return all(c.holds(snapshot) for c in self.conditions)

    def matches_clock(self, tick: int, snapshot: SystemSnapshot) -> bool:
        if self.clock_time is None:
            return False
        if tick % SECONDS_PER_DAY != self.clock_time:
            return False
        return all(c.holds(snapshot) for c in self.conditions)


@dataclass
class AppSpec:
    id: str
    name: str
    rules: list[AppRule]
    suppression_enabled: bool = False

    @property
    def subscriptions(self) -> set[str]:
        subs = set()
        for rule in self.rules:
            if rule.trigger_device is not None:
                subs.add(rule.trigger_device)
            subs.update(c.device for c in rule.conditions)
        return subs


def _rule(trigger, op, value, actions, conditions=()):
    return AppRule(trigger_device=trigger, trigger_op=op, trigger_value=value,
                   conditions=tuple(Condition(*c) for c in conditions),
                   actions=tuple(actions))


def builtin_apps(window_close_time: int = 21 * 3600) -> list[AppSpec]:
    """The eleven evaluation apps over the default home devices.

    Windows open at 07:00; the evening close time is configurable.
    """
    apps = [
        AppSpec("App1", "Motion-Activated-Lights", [
            _rule("motion", "==", 1, [("light", 1), ("light2", 1)]),
            _rule("motion", "==", 0, [("light", 0), ("light2", 0)]),
        ]),
        AppSpec("App2", "Smoke-Alarm", [
            _rule("smoke", "==", 1, [("alarm", 1), ("door_lock", 0)]),
            _rule("smoke", "==", 0, [("alarm", 0)]),
        ]),
        AppSpec("App3", "Temperature-Control", [
            _rule("temperature", "<", 70, [("heater", 1), ("ac", 0)]),
            _rule("temperature", ">", 80, [("ac", 1), ("heater", 0)]),
            AppRule(trigger_device="temperature", trigger_op=">=", trigger_value=70,
                    conditions=(Condition("temperature", "<=", 80),),
                    actions=(("heater", 0), ("ac", 0))),
        ]),
        AppSpec("App4", "Water-Leak-Detector", [
            _rule("leak", "==", 1, [("alarm", 1), ("water_valve", 0)]),
            _rule("leak", "==", 0, [("alarm", 0), ("water_valve", 1)]),
        ]),
        AppSpec("App5", "Welcome-Home", [
            _rule("presence", "==", 1, [("door_lock", 0), ("coffee_machine", 1)]),
        ]),
        AppSpec("App6", "Secure-Patio", [
            _rule("contact", "==", 1, [(NOTIFY_SINK_ID, 1)], [("presence", "==", 0)]),
        ]),
        AppSpec("App7", "Energy-Saver", [
            _rule("window", "==", 1, [("window", 0)], [("heater", "==", 1)]),
            _rule("window", "==", 1, [("window", 0)], [("ac", "==", 1)]),
            _rule("window2", "==", 1, [("window2", 0)], [("heater", "==", 1)]),
            _rule("window2", "==", 1, [("window2", 0)], [("ac", "==", 1)]),
            _rule("heater", "==", 1, [("window", 0)], [("window", "==", 1)]),
            _rule("heater", "==", 1, [("window2", 0)], [("window2", "==", 1)]),
            _rule("ac", "==", 1, [("window", 0)], [("window", "==", 1)]),
            _rule("ac", "==", 1, [("window2", 0)], [("window2", "==", 1)]),
        ]),
        AppSpec("App8", "Secure-Home", [
            _rule("presence", "==", 0, [("door_lock", 1), ("window", 0), ("window2", 0)]),
        ]),
        AppSpec("App9", "Intruder-Detector", [
            _rule("motion", "==", 1, [(NOTIFY_SINK_ID, 1)], [("presence", "==", 0)]),
        ]),
        AppSpec("App10", "Alarm-Safety", [
            _rule("alarm", "==", 1, [("light", 1), ("light2", 1)]),
        ]),
        AppSpec("App11", "Morning-Air", [
            AppRule(clock_time=7 * 3600, actions=(("window", 1), ("window2", 1))),
            AppRule(clock_time=window_close_time, actions=(("window", 0), ("window2", 0))),
        ]),
    ]
    return apps


@dataclass(frozen=True)
class Command:
    app_id: str
    device: str
    value: float


class AppEngine:
    """Evaluates app rules against events and the clock; honors suppression."""

    def __init__(self, apps: list[AppSpec], registry: Registry):
        self.apps = sorted(apps, key=lambda a: _app_order(a.id))
        self.registry = registry
        self.suppressed_apps: set[str] = set()
        self.events_delivered: dict[str, int] = {a.id: 0 for a in self.apps}
        self.commands_emitted: dict[str, int] = {a.id: 0 for a in self.apps}

    def dispatch(self, event: Event, snapshot: SystemSnapshot) -> list[Command]:
        """Commands produced by all subscribed, non-suppressed apps, in app-id order.

        Commands aimed at suppressed devices are dropped before return.
        """
        commands: list[Command] = []
        for app in self.apps:
            if app.id in self.suppressed_apps:
                continue
            if event.device not in app.subscriptions:
                continue
            self.events_delivered[app.id] += 1
            for rule in app.rules:
                if rule.matches_event(event, snapshot):
                    for device, value in rule.actions:
                        self.commands_emitted[app.id] += 1
                        if device in self.registry.suppressed:
                            continue
                        commands.append(Command(app.id, device, value))
        return commands

    def clock_commands(self, tick: int, snapshot: SystemSnapshot) -> list[Command]:
        commands: list[Command] = []
        for app in self.apps:
            if app.id in self.suppressed_apps:
                continue
            for rule in app.rules:
                if rule.matches_clock(tick, snapshot):
                    for device, value in rule.actions:
                        self.commands_emitted[app.id] += 1
                        if device in self.registry.suppressed:
                            continue
                        commands.append(Command(app.id, device, value))
        return commands

    def does_actuation_cascade(self, device: str, value: float, snapshot: SystemSnapshot) -> bool:
        """Would actuating ``device`` to ``value`` trigger any installed app rule?

        Pure hypothetical: evaluated against a copy of the snapshot with the
        new value applied; no state changes.
        """
        states = dict(snapshot.actuator_states)
        old = states.get(device, snapshot.sensor_states.get(device))
        if old == value:
            return False
        states[device] = value
        hypothetical = SystemSnapshot(dict(snapshot.sensor_states), states, snapshot.tick)
        event = Event(device, old, value, snapshot.tick)
        for app in self.apps:
            if app.id in self.suppressed_apps or event.device not in app.subscriptions:
                continue
            for rule in app.rules:
                if rule.matches_event(event, hypothetical) and rule.actions:
                    return True
        return False


def _app_order(app_id: str):
    # App2 sorts before App10 numerically
    if app_id.startswith("App") and app_id[3:].isdigit():
        return (0, int(app_id[3:]))
    return (1, app_id)


# -- rules file ------------------------------------------------------------

def apps_from_json(path) -> list[AppSpec]:
    """Load app definitions from a JSON rules file.

    Each app: ``{"id", "name", "suppression_enabled", "rules": [...]}`` where a
    rule has either ``{"trigger": {"device", "op", "value"}}`` or
    ``{"clock_time": seconds}``, plus optional ``conditions`` and ``actions``.
    """
    with open(path) as fh:
        records = json.load(fh)
    apps = []
    for rec in records:
        rules = []
        for r in rec.get("rules", []):
            conditions = tuple(Condition(c["device"], c.get("op", "=="), c["value"])
                               for c in r.get("conditions", []))
            actions = tuple((a["device"], a["value"]) for a in r.get("actions", []))
            if "clock_time" in r:
                rules.append(AppRule(clock_time=int(r["clock_time"]),
                                     conditions=conditions, actions=actions))
            else:
                trig = r["trigger"]
                rules.append(AppRule(trigger_device=trig["device"],
                                     trigger_op=trig.get("op", "=="),
                                     trigger_value=trig["value"],
                                     conditions=conditions, actions=actions))
        apps.append(AppSpec(rec["id"], rec.get("name", rec["id"]), rules,
                            suppression_enabled=bool(rec.get("suppression_enabled", False))))
    return apps
