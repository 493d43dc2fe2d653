"""Delimited report output and rendered figures for runs and comparisons."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .simulate import (DeviceObservation, RunMetrics, count_incorrect_states,
                       incorrect_per_device)

METRICS_FILE = "metrics.csv"
HISTORY_FILE = "history.csv"

_METRIC_COLUMNS = ["mode", "scheme", "ticks", "events", "events_suppressed",
                   "actuations", "restarts", "energy_mj", "rollbacks_attempted",
                   "rollbacks_succeeded", "rollback_actuations"]


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".6f")
    return str(value)


def write_run_report(out_dir, metrics: RunMetrics, history: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, METRICS_FILE), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_METRIC_COLUMNS)
        writer.writerow([_fmt(getattr(metrics, c)) for c in _METRIC_COLUMNS])
    devices = sorted(history)
    with open(os.path.join(out_dir, HISTORY_FILE), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tick"] + devices + [f"{d}_ok" for d in devices])
        ticks = len(history[devices[0]]) if devices else 0
        for t in range(ticks):
            row = [t]
            row += [format(history[d][t].value, "g") for d in devices]
            row += [int(history[d][t].responsive) for d in devices]
            writer.writerow(row)


def read_run_report(run_dir) -> tuple[dict, dict]:
    with open(os.path.join(run_dir, METRICS_FILE), newline="") as fh:
        reader = csv.DictReader(fh)
        metrics = next(reader)
    history: dict[str, list[DeviceObservation]] = {}
    with open(os.path.join(run_dir, HISTORY_FILE), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        devices = [c for c in header[1:] if not c.endswith("_ok")]
        history = {d: [] for d in devices}
        n = len(devices)
        for row in reader:
            for i, d in enumerate(devices):
                history[d].append(DeviceObservation(float(row[1 + i]),
                                                    row[1 + n + i] == "1"))
    return metrics, history


@dataclass
class RunComparison:
    label: str
    mode: str
    scheme: str
    incorrect_states: int
    handler_caused: int
    energy_mj: float
    reduction_vs_nohandler: Optional[float]


def compare_runs(runs_dir, out_dir=None) -> list[RunComparison]:
    """Compare every run under runs_dir against the baseline (mode a) run.

    Reductions are relative to the no-handler (mode b) run. Writes
    comparison.csv, summary.txt, and bar-chart figures next to the runs.
    """
    out_dir = out_dir or runs_dir
    runs = {}
    for name in sorted(os.listdir(runs_dir)):
        path = os.path.join(runs_dir, name)
        if os.path.isdir(path) and os.path.exists(os.path.join(path, METRICS_FILE)):
            runs[name] = read_run_report(path)
    baselines = [n for n, (m, _) in runs.items() if m["mode"] == "a"]
    if not baselines:
        raise ValueError("no baseline (mode a) run found")
    base_history = runs[baselines[0]][1]
    nohandler = next((n for n, (m, _) in runs.items() if m["mode"] == "b"), None)
    nh_history = runs[nohandler][1] if nohandler else None
    nh_incorrect = (count_incorrect_states(nh_history, base_history)[0]
                    if nh_history else None)

    rows: list[RunComparison] = []
    for name in sorted(runs):
        metrics, history = runs[name]
        incorrect, caused = count_incorrect_states(history, base_history, nh_history)
        reduction = None
        if nh_incorrect and metrics["mode"] in ("c", "d"):
            reduction = (nh_incorrect - incorrect) / nh_incorrect
        rows.append(RunComparison(name, metrics["mode"], metrics["scheme"],
                                  incorrect, caused, float(metrics["energy_mj"]),
                                  reduction))

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "comparison.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "mode", "scheme", "incorrect_states",
                         "handler_caused", "energy_mj", "reduction_vs_nohandler"])
        for r in rows:
            writer.writerow([r.label, r.mode, r.scheme, r.incorrect_states,
                             r.handler_caused, _fmt(r.energy_mj),
                             "" if r.reduction_vs_nohandler is None
                             else format(r.reduction_vs_nohandler, ".4f")])
    with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
        fh.write("Run comparison (baseline: {})\n".format(baselines[0]))
        for r in rows:
            line = f"  {r.label}: mode={r.mode} incorrect={r.incorrect_states}"
            if r.handler_caused:
                line += f" handler_caused={r.handler_caused}"
            if r.reduction_vs_nohandler is not None:
                line += f" reduction={100 * r.reduction_vs_nohandler:.2f}%"
            line += f" energy={r.energy_mj:.3f}mJ"
            fh.write(line + "\n")
    _comparison_figures(rows, out_dir)
    return rows


def _comparison_figures(rows: list[RunComparison], out_dir) -> None:
    labels = [r.label for r in rows]
    fig, ax = plt.subplots(figsize=(max(6, len(rows) * 1.2), 4))
    ax.bar(labels, [r.incorrect_states for r in rows], color="tab:red")
    ax.set_ylabel("incorrect device states")
    ax.set_title("Incorrect states per run")
    plt.setp(ax.get_xticklabels(), rotation=30, ha="right")
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "incorrect_states.png"))
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(max(6, len(rows) * 1.2), 4))
    ax.bar(labels, [r.energy_mj for r in rows], color="tab:blue")
    ax.set_ylabel("modeled energy (mJ)")
    ax.set_title("Energy per run")
    plt.setp(ax.get_xticklabels(), rotation=30, ha="right")
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "energy.png"))
    plt.close(fig)


def write_latency_report(out_dir, function_stats: dict, scheme_rows) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "function_latency.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["function", "mean_ms", "stddev_ms"])
        for name in sorted(function_stats):
            stats = function_stats[name]
            writer.writerow([name, _fmt(stats.mean_ms), _fmt(stats.stddev_ms)])
    with open(os.path.join(out_dir, "scheme_latency.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scheme", "fault_kind", "mean_handle_ms", "rollback_ms",
                         "repairable"])
        for row in scheme_rows:
            writer.writerow([row.scheme, row.fault_kind.value,
                             _fmt(row.mean_handle_ms), _fmt(row.rollback_ms),
                             int(row.repairable)])
    names = sorted(function_stats)
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.bar(names, [function_stats[n].mean_ms for n in names],
           yerr=[function_stats[n].stddev_ms for n in names], color="tab:green")
    ax.set_yscale("log")
    ax.set_ylabel("mean time (ms, log scale)")
    ax.set_title("Handling function latency")
    plt.setp(ax.get_xticklabels(), rotation=30, ha="right")
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "function_latency.png"))
    plt.close(fig)
