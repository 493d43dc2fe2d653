"""Report output: CSV round trips, comparisons, figures, CLI wiring."""

import os

from click.testing import CliRunner

from faultsim.cli import main
from faultsim.faults import FaultKind, FaultSpec, Fixability
from faultsim.report import compare_runs, read_run_report, write_run_report
from faultsim.simulate import RunMode, generate_trace, run_simulation, save_trace

SCHEDULE = [FaultSpec(100, "motion", FaultKind.HIGH_VARIANCE,
                      Fixability.SOFT_FIXABLE, 1.0, end_tick=800)]


def test_run_report_round_trip(tmp_path):
    trace = generate_trace(1, 1000)
    metrics, history = run_simulation(trace, RunMode.NO_HANDLER, schedule=SCHEDULE)
    write_run_report(tmp_path / "run", metrics, history)
    loaded_metrics, loaded_history = read_run_report(tmp_path / "run")
    assert loaded_metrics["mode"] == "b"
    assert int(loaded_metrics["events"]) == metrics.events
    assert set(loaded_history) == set(history)
    assert [o.value for o in loaded_history["motion"]] == \
        [o.value for o in history["motion"]]
    assert [o.responsive for o in loaded_history["motion"]] == \
        [o.responsive for o in history["motion"]]


def test_report_output_is_byte_identical_across_runs(tmp_path):
    trace = generate_trace(1, 1000)
    for name in ("one", "two"):
        metrics, history = run_simulation(trace, RunMode.FULL_HANDLER, schedule=SCHEDULE)
        write_run_report(tmp_path / name, metrics, history)
    for fname in ("metrics.csv", "history.csv"):
        a = (tmp_path / "one" / fname).read_bytes()
        b = (tmp_path / "two" / fname).read_bytes()
        assert a == b


def test_compare_writes_tables_and_figures(tmp_path):
    trace = generate_trace(1, 1000)
    runs = tmp_path / "runs"
    for mode in (RunMode.BASELINE, RunMode.NO_HANDLER, RunMode.FULL_HANDLER):
        metrics, history = run_simulation(trace, mode, schedule=SCHEDULE)
        write_run_report(runs / mode.value, metrics, history)
    rows = compare_runs(runs)
    by_mode = {r.mode: r for r in rows}
    assert by_mode["a"].incorrect_states == 0
    assert by_mode["d"].incorrect_states <= by_mode["b"].incorrect_states
    assert by_mode["d"].reduction_vs_nohandler is not None
    assert by_mode["b"].reduction_vs_nohandler is None
    for fname in ("comparison.csv", "summary.txt", "incorrect_states.png", "energy.png"):
        assert (runs / fname).exists()


class TestCli:
    def test_full_pipeline(self, tmp_path):
        runner = CliRunner()
        trace = tmp_path / "trace.csv"
        faults = tmp_path / "faults.csv"
        assert runner.invoke(main, ["gen-trace", "--seed", "1", "--ticks", "800",
                                    "--out", str(trace)]).exit_code == 0
        assert runner.invoke(main, ["gen-faults", "--seed", "1", "--ticks", "800",
                                    "--out", str(faults)]).exit_code == 0
        for mode in "ab":
            args = ["run", "--trace", str(trace), "--mode", mode,
                    "--report-dir", str(tmp_path / "runs" / mode)]
            if mode != "a":
                args += ["--faults", str(faults)]
            result = runner.invoke(main, args)
            assert result.exit_code == 0, result.output
        result = runner.invoke(main, ["compare", "--runs", str(tmp_path / "runs")])
        assert result.exit_code == 0, result.output

    def test_latency_report(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(main, ["latency", "--out", str(tmp_path / "lat")])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "lat" / "function_latency.csv").exists()
        assert (tmp_path / "lat" / "scheme_latency.csv").exists()
        assert (tmp_path / "lat" / "function_latency.png").exists()

    def test_validation_failures_exit_2(self, tmp_path):
        runner = CliRunner()
        trace = tmp_path / "trace.csv"
        save_trace(generate_trace(1, 100), trace)
        # fault-bearing mode without a schedule
        result = runner.invoke(main, ["run", "--trace", str(trace), "--mode", "b",
                                      "--report-dir", str(tmp_path / "x")])
        assert result.exit_code == 2
        # malformed schedule file
        bad = tmp_path / "bad.csv"
        bad.write_text("1,motion,NOT_A_KIND,SOFT_FIXABLE,1\n")
        result = runner.invoke(main, ["run", "--trace", str(trace), "--mode", "b",
                                      "--faults", str(bad),
                                      "--report-dir", str(tmp_path / "x")])
        assert result.exit_code == 2
        result = runner.invoke(main, ["gen-trace", "--ticks", "0",
                                      "--out", str(tmp_path / "t.csv")])
        assert result.exit_code == 2

    def test_compare_without_baseline_exits_2(self, tmp_path):
        runner = CliRunner()
        os.makedirs(tmp_path / "runs")
        result = runner.invoke(main, ["compare", "--runs", str(tmp_path / "runs")])
        assert result.exit_code == 2
