#!/usr/bin/env python3

"""Plot sweep curves from a runs.csv produced by ``python -m src.main sweep``.

Needs the optional plot group: ``poetry install --with plot``.
"""

import argparse
import csv
import logging
import sys
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.experiment_runner import STATUS_OK, std_error  # noqa: E402

LABELS = {
    "jain_index": "Jain's fairness index",
    "mismanagement_ratio": "Mismanagement ratio",
    "available_clusters_per_vehicle": "Available mining clusters per vehicle",
    "mean_rate_bits_per_s": "Transmission rate (bit/s)",
    "sum_log_utility": "Sum of log-utilities (nats)",
    "rounds": "Auction rounds",
}
SWEEP_LABELS = {
    "clusters": "Number of mining clusters",
    "delta": "Bid increment",
    "epsilon": "Decoding error probability",
}

Curve = Dict[str, List[Tuple[float, float, float]]]


def load_curves(runs_csv: Path, metric: str) -> Tuple[str, Curve]:
    """Mean and standard error of ``metric`` per algorithm and sweep value."""
    values = defaultdict(list)
    sweep_var = None
    with open(runs_csv, newline="") as f:
        for row in csv.DictReader(f):
            sweep_var = row["sweep_var"] or sweep_var
            if row["status"] != STATUS_OK or row[metric] == "" or row["sweep_value"] == "":
                continue
            values[(row["algorithm"], float(row["sweep_value"]))].append(float(row[metric]))

    curves: Curve = defaultdict(list)
    for (algorithm, x), samples in sorted(values.items()):
        std = float(np.std(samples, ddof=1)) if len(samples) > 1 else 0.0
        curves[algorithm].append((x, float(np.mean(samples)), std_error(std, len(samples))))
    return sweep_var, curves


def plot_metric(runs_csv: Path, metric: str, output: Path) -> Path:
    sweep_var, curves = load_curves(runs_csv, metric)
    if not curves:
        raise ValueError(f"No completed sweep rows with {metric} in {runs_csv}")

    fig, ax = plt.subplots(figsize=(6, 4))
    for algorithm, points in curves.items():
        xs, means, errors = zip(*points)
        ax.errorbar(xs, means, yerr=errors, marker="o", capsize=3, label=algorithm)
    if sweep_var in ("delta", "epsilon"):
        ax.set_xscale("log")
    ax.set_xlabel(SWEEP_LABELS.get(sweep_var, sweep_var or "sweep value"))
    ax.set_ylabel(LABELS[metric])
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(output, dpi=150)
    plt.close(fig)
    return output


def main() -> int:
    parser = argparse.ArgumentParser(
        description="Plot mean +/- standard error curves from runs.csv",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("runs_csv", help="runs.csv written by a sweep")
    parser.add_argument(
        "-m",
        "--metric",
        action="append",
        choices=list(LABELS),
        help="Metric to plot; repeat for several (default: all)",
    )
    parser.add_argument("-o", "--out", help="Directory for the PNG files (default: next to the CSV)")
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")

    runs_csv = Path(args.runs_csv)
    out_dir = Path(args.out) if args.out else runs_csv.parent
    out_dir.mkdir(parents=True, exist_ok=True)

    try:
        for metric in args.metric or list(LABELS):
            try:
                path = plot_metric(runs_csv, metric, out_dir / f"{metric}.png")
            except ValueError as e:
                logging.warning(str(e))
                continue
            logging.info(f"Plot saved to: {path}")
    except Exception as e:
        logging.error(f"Error: {str(e)}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
