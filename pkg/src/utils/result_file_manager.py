"""Saving experiment results to the output directory."""

import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional

from src.utils.file_utils import ensure_directory, write_csv, write_json, write_ndjson

logger = logging.getLogger("result_files")

RUN_COLUMNS = [
    "sweep_var",
    "sweep_value",
    "sweep_index",
    "replication",
    "seed",
    "algorithm",
    "num_vehicles",
    "num_clusters",
    "delta",
    "epsilon",
    "blocklength",
    "jain_index",
    "mismanagement_ratio",
    "sum_log_utility",
    "mean_rate_bits_per_s",
    "available_clusters_per_vehicle",
    "rounds",
    "round_bound",
    "status",
]

VALIDATION_COLUMNS = [
    "instance",
    "seed",
    "num_vehicles",
    "num_clusters",
    "max_alpha",
    "delta",
    "c_const",
    "auction_value",
    "oracle_value",
    "gap",
    "gap_limit",
    "rounds",
    "round_bound",
    "feasible",
    "within_gap",
    "within_bound",
]

RUNS_FILE = "runs.csv"
SUMMARY_FILE = "summary.json"
TRACE_FILE = "trace.ndjson"
VALIDATION_FILE = "validation.csv"


class ResultFileManager:
    """Writes the result files of one experiment into a single directory."""

    def __init__(self, output_dir):
        """Initialize the result file manager.

        Args:
            output_dir: Directory receiving the result files; created if missing
        """
        self.output_dir = ensure_directory(Path(output_dir))
        logger.debug(f"Result files go to: {self.output_dir}")

    def _write(self, kind: str, writer, *args) -> Path:
        try:
            path = writer(*args)
        except OSError as e:
            logger.error(f"Error saving {kind}: {str(e)}")
            raise
        logger.info(f"{kind} saved to: {path}")
        return path

    def save_runs(self, rows: Iterable[Mapping[str, Any]]) -> Path:
        """Save one row per (sweep point, replication, algorithm)."""
        return self._write("Run table", write_csv, self.output_dir / RUNS_FILE, RUN_COLUMNS, rows)

    def save_summary(self, summary: Dict[str, Any]) -> Path:
        """Save the aggregate summary with its config echo."""
        return self._write("Summary", write_json, self.output_dir / SUMMARY_FILE, summary)

    def save_trace(self, records: List[Mapping[str, Any]]) -> Optional[Path]:
        """Save per-round auction records; nothing is written for an empty trace."""
        if not records:
            logger.debug("No trace records to save")
            return None
        return self._write("Auction trace", write_ndjson, self.output_dir / TRACE_FILE, records)

    def save_validation(self, rows: Iterable[Mapping[str, Any]]) -> Path:
        """Save the per-instance oracle audit."""
        return self._write(
            "Validation table",
            write_csv,
            self.output_dir / VALIDATION_FILE,
            VALIDATION_COLUMNS,
            rows,
        )
