"""Charts from simulator trace CSVs: fortune, fee losses, and swap spend
over time (min/max banded across seeds), plus final fortune against a swept
parameter.

Usage:
    python -m relayagent.plot RUN_DIR --out FIG_DIR
    python -m relayagent.plot RUN_DIR --sweep sweep.csv --out FIG_DIR
"""

from __future__ import annotations

import argparse
import csv
import glob
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

REQUIRED = ("time", "fortune", "cum_lost_fees", "cum_swap_fees")


def read_trace(path: str) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [name for name in REQUIRED if name not in (reader.fieldnames or [])]
        if missing:
            raise SystemExit(f"{path}: missing columns {missing}")
        rows = list(reader)
    return {
        name: np.array([float(row[name]) for row in rows]) for name in REQUIRED
    }


def banded(ax, traces: list[dict[str, np.ndarray]], column: str, label: str) -> None:
    length = min(len(t["time"]) for t in traces)
    time = traces[0]["time"][:length]
    stacked = np.stack([t[column][:length] for t in traces])
    ax.plot(time, stacked.mean(axis=0), label=label)
    if len(traces) > 1:
        ax.fill_between(time, stacked.min(axis=0), stacked.max(axis=0), alpha=0.25)


def group_traces(run_dir: str) -> dict[str, list[dict[str, np.ndarray]]]:
    """Traces grouped by name with the trailing _seedN stripped."""
    groups: dict[str, list[dict[str, np.ndarray]]] = {}
    for path in sorted(glob.glob(os.path.join(run_dir, "**", "trace_*.csv"), recursive=True)):
        stem = os.path.basename(path)[len("trace_"):-len(".csv")]
        label = stem.rsplit("_seed", 1)[0] if "_seed" in stem else stem
        groups.setdefault(label, []).append(read_trace(path))
    return groups


def plot_over_time(groups, column: str, title: str, ylabel: str, out_path: str) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, traces in sorted(groups.items()):
        banded(ax, traces, column, label)
    ax.set_xlabel("simulated minutes")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    print(f"wrote {out_path}")


def plot_sweep(sweep_csv: str, out_path: str) -> None:
    with open(sweep_csv, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise SystemExit(f"{sweep_csv}: empty sweep table")
    values = np.array([float(row["value"]) for row in rows])
    mean = np.array([float(row["mean"]) for row in rows])
    lo = np.array([float(row["min"]) for row in rows])
    hi = np.array([float(row["max"]) for row in rows])
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.errorbar(values, mean, yerr=[mean - lo, hi - mean], fmt="o-", capsize=4)
    ax.set_xscale("log")
    ax.set_xlabel("swept parameter value")
    ax.set_ylabel("final fortune")
    ax.set_title(os.path.basename(sweep_csv))
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    print(f"wrote {out_path}")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("run_dir", help="directory containing trace_*.csv files")
    parser.add_argument("--out", default=None, help="figure directory (default: run_dir)")
    parser.add_argument("--sweep", default=None, help="sweep CSV for the final-fortune chart")
    args = parser.parse_args(argv)

    out_dir = args.out or args.run_dir
    os.makedirs(out_dir, exist_ok=True)

    groups = group_traces(args.run_dir)
    if not groups and args.sweep is None:
        print(f"no trace CSVs found under {args.run_dir}", file=sys.stderr)
        return 1
    if groups:
        plot_over_time(groups, "fortune", "Total fortune over time", "fortune",
                       os.path.join(out_dir, "fortune_over_time.png"))
        plot_over_time(groups, "cum_lost_fees", "Fees lost to dropped payments",
                       "cumulative lost fees", os.path.join(out_dir, "lost_fees_over_time.png"))
        plot_over_time(groups, "cum_swap_fees", "Rebalancing spend over time",
                       "cumulative swap fees", os.path.join(out_dir, "swap_fees_over_time.png"))
    if args.sweep:
        plot_sweep(args.sweep, os.path.join(out_dir, "final_fortune_vs_value.png"))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
