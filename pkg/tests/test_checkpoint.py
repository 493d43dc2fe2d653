"""Checkpoint log semantics, rollback strategies, and oracle-equivalence properties."""

import pytest
from hypothesis import given, settings, strategies as st

from faultsim.checkpoint import (Checkpoint, CheckpointLog, RollbackFailure,
                                 RollbackStrategy, rollback, select_checkpoint)
from faultsim.devices import (DeviceKind, DeviceSpec, Registry, SystemSnapshot,
                              default_home)
from faultsim.faults import FaultKind, FaultSpec, FaultTable, Fixability


class OracleStub:
    def __init__(self, faulty=()):
        self.faulty = set(faulty)

    def fault_free_window(self, device, start, end):
        return device not in self.faulty


def snap(sensors, actuators, tick):
    return SystemSnapshot(dict(sensors), dict(actuators), tick)


class TestLogEvolution:
    def test_motion_light_sequence(self):
        """Two appends, a frequency bump, then an overwrite that resets frequency."""
        log = CheckpointLog()
        log._commit(snap({"motion": 0}, {"light": 0}, 1))
        log._commit(snap({"motion": 1}, {"light": 1}, 2))
        assert [(e.frequency, e.last_tick) for e in log.entries] == [(1, 1), (1, 2)]
        log._commit(snap({"motion": 0}, {"light": 0}, 3))
        assert log.entries[0].frequency == 2
        assert log.entries[0].last_tick == 3
        log._commit(snap({"motion": 0}, {"light": 1}, 4))
        assert log.entries[0].frequency == 1
        assert log.entries[0].actuator_states == {"light": 1}
        assert len(log.entries) == 2

    def test_pending_discarded_when_window_faulty(self):
        log = CheckpointLog()
        log.take(snap({"motion": 0}, {"light": 0}, 10))
        log.process_pending(15, 5, OracleStub(faulty={"motion"}))
        assert log.entries == []
        assert log.pending == []

    def test_pending_commits_after_clean_window(self):
        log = CheckpointLog()
        log.take(snap({"motion": 0}, {"light": 0}, 10))
        log.process_pending(12, 5, OracleStub())
        assert log.entries == []  # still waiting
        log.process_pending(15, 5, OracleStub())
        assert len(log.entries) == 1

    def test_evict_stale(self):
        log = CheckpointLog()
        log._commit(snap({"m": 0}, {"l": 0}, 0))
        log._commit(snap({"m": 1}, {"l": 0}, 900))
        assert log.evict_stale(1000, 500) == 1
        assert [e.last_tick for e in log.entries] == [900]
        with pytest.raises(ValueError):
            log.evict_stale(1000, 0)

    def test_dump_restore_round_trip(self, tmp_path):
        log = CheckpointLog()
        log._commit(snap({"m": 0.0}, {"l": 1.0}, 7))
        log._commit(snap({"m": 1.0}, {"l": 0.0}, 9))
        path = tmp_path / "checkpoints.json"
        log.dump(path)
        other = CheckpointLog()
        other.restore(path)
        assert other.entries == log.entries

    def test_tolerance_applies_per_device(self):
        log = CheckpointLog({"temperature": 2.0})
        assert log.sensors_match({"temperature": 70.0, "motion": 0},
                                 {"temperature": 71.5, "motion": 0})
        assert not log.sensors_match({"temperature": 70.0, "motion": 0},
                                     {"temperature": 70.0, "motion": 1})


def home_registry(faults=()):
    reg = Registry(default_home())
    reg.sensor_truth = lambda dev, tick: 0.0
    reg.fault_table = FaultTable(list(faults))
    for f in faults:
        reg.fault_table.advance(f.start_tick)
    return reg


class TestRollbackScenario:
    def test_stuck_presence_corrected_through_motion(self):
        """Presence stuck at home while everyone left: the correlated motion
        sensor selects the checkpoint that locks the door and the presence
        live value is corrected to away."""
        reg = home_registry([FaultSpec(50, "presence", FaultKind.STUCK_AT,
                                       Fixability.UNFIXABLE, 1.0, end_tick=500)])
        for dev in reg.devices:
            reg.read_device(dev, 60)
        reg._commanded["door_lock"] = 0.0
        reg.live_values["door_lock"].value = 0.0
        log = CheckpointLog()
        sensors_home = {d: 0.0 for d in reg.sensors()}
        sensors_home["presence"] = 1.0
        sensors_home["motion"] = 1.0
        away = {d: 0.0 for d in reg.sensors()}
        lock = lambda v: {**{d: 0.0 for d in reg.actuators()}, "door_lock": v,
                          "water_valve": 1.0}
        log.entries = [
            Checkpoint(sensors_home, lock(0.0), 40, frequency=3),
            Checkpoint(away, lock(1.0), 45, frequency=5),
        ]
        result = rollback("presence", log, reg, RollbackStrategy.FAIL_NORM, 60)
        assert result.success
        assert reg.commanded("door_lock") == 1.0
        assert reg.overrides["presence"] == 0.0
        assert reg.read_device("presence", 61).value == 0.0

    def test_disabled_strategy_never_acts(self):
        reg = home_registry()
        log = CheckpointLog()
        log.entries = [Checkpoint({d: 0.0 for d in reg.sensors()},
                                  {d: 1.0 for d in reg.actuators()}, 10)]
        result = rollback("motion", log, reg, RollbackStrategy.DISABLED, 20)
        assert not result.success
        assert reg.actuation_log == []

    def test_faulty_actuator_blocks_whole_rollback(self):
        reg = home_registry([FaultSpec(0, "light", FaultKind.STUCK_AT,
                                       Fixability.UNFIXABLE, 0.0, end_tick=500)])
        for dev in reg.devices:
            reg.read_device(dev, 5)
        target = {d: reg.live_values[d].value for d in reg.actuators()}
        target["light"] = 1.0   # faulty actuator must change
        target["light2"] = 1.0  # healthy one would too
        log = CheckpointLog()
        log.entries = [Checkpoint({d: 0.0 for d in reg.sensors()}, target, 3)]
        result = rollback("light", log, reg, RollbackStrategy.MOST_RECENT, 10)
        assert result.failure is RollbackFailure.FAULTY_ACTUATOR_BLOCKS
        assert result.actuations == 0
        assert reg.actuation_log == []


# -- brute-force oracle equivalence ----------------------------------------

from _oracles import brute_force_select  # noqa: E402

SENSORS = ("s1", "s2")
ACTUATORS = ("a1", "a2")

entry_st = st.builds(
    Checkpoint,
    sensor_states=st.fixed_dictionaries({s: st.sampled_from([0.0, 1.0]) for s in SENSORS}),
    actuator_states=st.fixed_dictionaries({a: st.sampled_from([0.0, 1.0]) for a in ACTUATORS}),
    last_tick=st.integers(0, 1000),
    frequency=st.integers(1, 5),
)


@settings(max_examples=1000, deadline=None)
@given(entries=st.lists(entry_st, max_size=10),
       current=st.fixed_dictionaries({s: st.sampled_from([0.0, 1.0]) for s in SENSORS}),
       faulty=st.sets(st.sampled_from(SENSORS)),
       strategy=st.sampled_from([RollbackStrategy.MOST_RECENT,
                                 RollbackStrategy.FAIL_NORM,
                                 RollbackStrategy.FAIL_SAFE]))
def test_selection_matches_brute_force(entries, current, faulty, strategy):
    log = CheckpointLog()
    log.entries = entries
    fail_safe = {"a1": 1.0}
    got = select_checkpoint(log, strategy, current, faulty, fail_safe)
    want = brute_force_select(entries, strategy, current, faulty, fail_safe, log.tolerances)
    assert got is want


# -- no-partial-rollback property ------------------------------------------

def tiny_registry(faulty_actuators, actuator_values, target_values):
    specs = [DeviceSpec("s1", "s1", DeviceKind.SENSOR, "S1")]
    specs += [DeviceSpec(a, a, DeviceKind.ACTUATOR, "A1") for a in ACTUATORS]
    reg = Registry(specs)
    reg.sensor_truth = lambda dev, tick: 0.0
    faults = [FaultSpec(0, a, FaultKind.STUCK_AT, Fixability.UNFIXABLE, 0.0, end_tick=100)
              for a in sorted(faulty_actuators)]
    reg.fault_table = FaultTable(faults)
    reg.fault_table.advance(0)
    reg.read_device("s1", 1)
    for a, v in actuator_values.items():
        reg._commanded[a] = v
        reg.live_values[a].value = v
    log = CheckpointLog()
    log.entries = [Checkpoint({"s1": 0.0}, dict(target_values), 5)]
    return reg, log


@settings(max_examples=300, deadline=None)
@given(faulty=st.sets(st.sampled_from(ACTUATORS)),
       current=st.fixed_dictionaries({a: st.sampled_from([0.0, 1.0]) for a in ACTUATORS}),
       target=st.fixed_dictionaries({a: st.sampled_from([0.0, 1.0]) for a in ACTUATORS}),
       strategy=st.sampled_from([RollbackStrategy.MOST_RECENT,
                                 RollbackStrategy.FAIL_NORM,
                                 RollbackStrategy.FAIL_SAFE]))
def test_failed_rollback_issues_zero_actuations(faulty, current, target, strategy):
    reg, log = tiny_registry(faulty, current, target)
    result = rollback("s1", log, reg, strategy, 10)
    if result.success:
        # every mismatched actuator now matches the checkpoint
        for a in ACTUATORS:
            assert reg.commanded(a) == target[a] or current[a] == target[a]
    else:
        assert result.actuations == 0
        assert reg.actuation_log == []
        for a in ACTUATORS:
            assert reg.commanded(a) == current[a]
