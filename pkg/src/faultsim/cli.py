"""Command-line entry points."""

from __future__ import annotations

import sys

import click

from . import latency as lat
from . import report as rpt
from .config import SchemaError, load_config
from .devices import default_home
from .faults import (ParseError, ScheduleProfile, generate_schedule,
                     parse_fault_schedule, write_fault_schedule)
from .schemes import BUILTIN_SCHEMES
from .simulate import RunMode, generate_trace, load_trace, run_simulation, save_trace

EXIT_VALIDATION = 2


@click.group()
def main():
    """Trace-driven smart-home simulator with fault injection and handling."""


@main.command("gen-trace")
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--ticks", type=int, default=50000, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def gen_trace(seed, ticks, out):
    """Generate a ground-truth sensor trace CSV."""
    if ticks <= 0:
        click.echo("error: --ticks must be positive", err=True)
        sys.exit(EXIT_VALIDATION)
    save_trace(generate_trace(seed, ticks), out)
    click.echo(f"wrote {ticks}-tick trace (seed {seed}) to {out}")


@main.command("gen-faults")
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--profile", type=click.Choice(["single", "multiple"]),
              default="single", show_default=True)
@click.option("--ticks", type=int, default=50000, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def gen_faults(seed, profile, ticks, out):
    """Generate a fault schedule CSV."""
    if ticks <= 0:
        click.echo("error: --ticks must be positive", err=True)
        sys.exit(EXIT_VALIDATION)
    prof = (ScheduleProfile() if profile == "single"
            else ScheduleProfile(fault_count=30, overlap=True, failstop_fraction=0.7))
    devices = {spec.id: spec for spec in default_home()}
    schedule = generate_schedule(seed, ticks, devices, prof)
    write_fault_schedule(out, schedule)
    click.echo(f"wrote {len(schedule)} faults to {out}")


@main.command("run")
@click.option("--trace", "trace_path", type=click.Path(exists=True), required=True)
@click.option("--faults", "faults_path", type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["a", "b", "c", "d"]), required=True,
              help="a=faultless baseline, b=faults without handling, "
                   "c=suppression only, d=automated handling")
@click.option("--scheme", type=click.Choice(sorted(BUILTIN_SCHEMES)),
              default="conservative", show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--ticks", type=int, help="limit the run length")
@click.option("--report-dir", type=click.Path(file_okay=False), required=True)
def run(trace_path, faults_path, mode, scheme, config_path, ticks, report_dir):
    """Execute one run and write its metrics and state history."""
    trace = load_trace(trace_path)
    run_mode = RunMode(mode)
    schedule = []
    if faults_path:
        try:
            schedule = parse_fault_schedule(faults_path)
        except ParseError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)
    if run_mode is not RunMode.BASELINE and not schedule:
        click.echo("error: --faults is required for modes b, c, d", err=True)
        sys.exit(EXIT_VALIDATION)
    config = None
    if config_path:
        try:
            config = load_config(config_path)
        except SchemaError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)
    if ticks is not None:
        trace.ticks = min(trace.ticks, ticks)
    metrics, history = run_simulation(trace, run_mode, schedule=schedule,
                                      config=config, scheme=scheme)
    rpt.write_run_report(report_dir, metrics, history)
    click.echo(f"mode {mode}: {metrics.events} events, {metrics.actuations} "
               f"actuations, {metrics.energy_mj:.3f} mJ -> {report_dir}")


@main.command("compare")
@click.option("--runs", "runs_dir", type=click.Path(exists=True, file_okay=False),
              required=True, help="directory of run report subdirectories")
@click.option("--out", "out_dir", type=click.Path(file_okay=False))
def compare(runs_dir, out_dir):
    """Compare runs against the baseline; writes CSV, summary, and figures."""
    try:
        rows = rpt.compare_runs(runs_dir, out_dir)
    except (ValueError, FileNotFoundError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    for row in rows:
        line = f"{row.label}: incorrect={row.incorrect_states}"
        if row.reduction_vs_nohandler is not None:
            line += f" reduction={100 * row.reduction_vs_nohandler:.2f}%"
        click.echo(line)


@main.command("latency")
@click.option("--cost-model", "cost_model_path", type=click.Path(exists=True))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
def latency(cost_model_path, out_dir):
    """Analytic handling-latency report for the default device set."""
    try:
        cm = lat.CostModel.load(cost_model_path) if cost_model_path else lat.CostModel()
    except (ValueError, KeyError, TypeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    devices = default_home()
    stats = lat.function_timings(devices, cm)
    schemes = lat.scheme_timings(devices, cm)
    rpt.write_latency_report(out_dir, stats, schemes)
    slowest = max(stats, key=lambda n: stats[n].mean_ms)
    click.echo(f"slowest function: {slowest} ({stats[slowest].mean_ms:.1f} ms mean)"
               f" -> {out_dir}")


if __name__ == "__main__":
    main()
