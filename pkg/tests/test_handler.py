"""Automated handler sessions, scheme execution order, redundancy detection."""

import pytest

from faultsim.config import init_config
from faultsim.devices import DeviceKind, DeviceSpec, Registry, default_home
from faultsim.faults import FaultKind, FaultSpec, Fixability
from faultsim.handler import SessionOutcome, detect_redundant_devices
from faultsim.schemes import BUILTIN_SCHEMES, Step
from faultsim.simulate import RunMode, Simulation, generate_trace


def full_sim(schedule, scheme="conservative", ticks=800, config_tweak=None):
    trace = generate_trace(1, ticks)
    sim = Simulation(trace, RunMode.FULL_HANDLER, schedule=schedule, scheme=scheme)
    if config_tweak:
        config_tweak(sim)
    return sim


def run_until_finished(sim, device, max_ticks=2000):
    while sim.tick < max_ticks:
        sim.step()
        for s in sim.handler.finished:
            if s.device == device:
                return s
    raise AssertionError("session never finished")


SURVIVOR = FaultSpec(10, "window", FaultKind.STUCK_AT, Fixability.UNFIXABLE, 1.0,
                     end_tick=100000)


@pytest.mark.parametrize("scheme", sorted(BUILTIN_SCHEMES))
def test_executed_steps_follow_scheme_order(scheme):
    """A fault that survives every step must walk the whole configured order."""
    sim = full_sim([SURVIVOR], scheme=scheme)
    session = run_until_finished(sim, "window")
    assert session.outcome is SessionOutcome.UNREPAIRED
    assert tuple(session.executed_steps) == BUILTIN_SCHEMES[scheme].steps


def test_session_suppresses_then_restores():
    spec = FaultSpec(10, "motion", FaultKind.STUCK_AT, Fixability.SOFT_FIXABLE, 1.0,
                     end_tick=100000)
    sim = full_sim([spec])
    while sim.tick < 15:
        sim.step()
    assert "motion" in sim.registry.suppressed
    session = run_until_finished(sim, "motion")
    assert session.outcome is SessionOutcome.REPAIRED
    assert Step.SOFT_RESTART in session.executed_steps
    assert "motion" not in sim.registry.suppressed
    assert sim.registry.fault_table.get("motion") is None


def test_one_session_per_device_with_coalesced_reports():
    spec = FaultSpec(10, "motion", FaultKind.STUCK_AT, Fixability.SOFT_FIXABLE, 1.0,
                     end_tick=100000)
    sim = full_sim([spec])
    while sim.tick < 15:
        sim.step()
    assert set(sim.handler.sessions) == {"motion"}
    report = sim.handler.sessions["motion"].report
    sim.handler.report(report)  # duplicate report is a no-op
    assert len(sim.handler.sessions) == 1


def test_replicate_step_short_circuits_when_replica_available():
    spec = FaultSpec(10, "smoke", FaultKind.POWER, Fixability.UNFIXABLE, end_tick=100000)

    def tweak(sim):
        sim.config.device("smoke").replicas = ["smoke_rep"]

    sim = full_sim([spec], config_tweak=tweak)
    session = run_until_finished(sim, "smoke")
    assert session.executed_steps == [Step.REPLICATE]
    assert session.outcome is SessionOutcome.REPAIRED
    assert sim.registry.redirects["smoke"] == "smoke_rep"
    assert "smoke" not in sim.registry.suppressed


def test_redirect_removed_after_scheduled_fault_end():
    spec = FaultSpec(10, "smoke", FaultKind.POWER, Fixability.UNFIXABLE, end_tick=120)

    def tweak(sim):
        sim.config.device("smoke").replicas = ["smoke_rep"]

    sim = full_sim([spec], config_tweak=tweak)
    run_until_finished(sim, "smoke")
    assert "smoke" in sim.registry.redirects
    while sim.tick < 125:
        sim.step()
    assert "smoke" not in sim.registry.redirects


def test_restart_steps_skipped_for_unsupported_device():
    spec = FaultSpec(10, "window", FaultKind.STUCK_AT, Fixability.UNFIXABLE, 1.0,
                     end_tick=100000)
    sim = full_sim([spec])
    sim.registry.devices["window"].supports_soft_restart = False
    session = run_until_finished(sim, "window")
    assert Step.SOFT_RESTART not in session.executed_steps
    assert Step.HARD_RESTART in session.executed_steps


def test_unrepaired_device_stays_suppressed_until_fault_ends():
    spec = FaultSpec(10, "window", FaultKind.STUCK_AT, Fixability.UNFIXABLE, 1.0,
                     end_tick=700)
    sim = full_sim([spec])
    session = run_until_finished(sim, "window")
    assert session.outcome is SessionOutcome.UNREPAIRED
    assert "window" in sim.registry.suppressed
    while sim.tick < 705:
        sim.step()
    assert "window" not in sim.registry.suppressed


def test_notifications_for_occurrence_and_outcome():
    spec = FaultSpec(10, "motion", FaultKind.STUCK_AT, Fixability.SOFT_FIXABLE, 1.0,
                     end_tick=100000)
    sim = full_sim([spec])
    run_until_finished(sim, "motion")
    outcomes = [r.outcome for r in sim.notifications.records if r.device == "motion"]
    assert outcomes == ["occurred", "repaired"]


# -- redundancy detection ---------------------------------------------------

def history_from_streams(**streams):
    return {name: list(values) for name, values in streams.items()}


def detection_fixture(window=200):
    specs = default_home() + [DeviceSpec("motion2", "Motion clone", DeviceKind.SENSOR, "S1"),
                              DeviceSpec("motion3", "Motion oddball", DeviceKind.SENSOR, "S1")]
    reg = Registry(specs)
    config = init_config(reg)
    config.general.redundancy_detection.window = window
    return reg, config


def test_duplicate_stream_detected_and_uncorrelated_rejected():
    trace = generate_trace(5, 6000)
    reg, config = detection_fixture(window=5000)
    history = history_from_streams(
        motion=trace.streams["motion"],
        motion2=trace.streams["motion"],           # exact duplicate
        motion3=trace.streams["presence"],         # same class, different behavior
        presence=trace.streams["presence"],
    )
    pairs = detect_redundant_devices(history, reg, config)
    assert ("motion", "motion2") in pairs
    assert not any("motion3" in p and "motion" in p for p in pairs)
    # written symmetrically into the config
    assert "motion2" in config.device("motion").replicas
    assert "motion" in config.device("motion2").replicas


def test_different_type_classes_never_pair():
    trace = generate_trace(5, 6000)
    reg, config = detection_fixture(window=5000)
    history = history_from_streams(motion=trace.streams["motion"],
                                   presence=trace.streams["motion"])
    assert detect_redundant_devices(history, reg, config) == []


def test_short_history_is_inconclusive():
    reg, config = detection_fixture(window=200)
    history = history_from_streams(motion=[0.0] * 50, motion2=[0.0] * 50)
    assert detect_redundant_devices(history, reg, config) == []


def test_manual_replicas_keep_priority():
    trace = generate_trace(5, 6000)
    reg, config = detection_fixture(window=5000)
    config.device("motion").replicas = ["motion3"]
    history = history_from_streams(motion=trace.streams["motion"],
                                   motion2=trace.streams["motion"])
    detect_redundant_devices(history, reg, config)
    assert config.device("motion").replicas == ["motion3", "motion2"]
