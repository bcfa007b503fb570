"""Seeded Monte-Carlo experiments over the selection solvers."""

import logging
import math
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.config import ExperimentConfig
from src.errors import FeasibilityError, InfeasibleBandwidthError, OracleSizeError
from src.matching_graph import expand_graph, matching_weight
from src.metrics import METRIC_FIELDS, MetricsReport, aggregate, evaluate
from src.scenario import ProblemInstance, build_instance, generate_topology
from src.solvers import get_solver
from src.solvers.auction_solver import run_auction
from src.solvers.oracle_solver import max_weight_matching_oracle
from src.utils.result_file_manager import ResultFileManager

SUMMARY_SCHEMA_VERSION = 1

STATUS_OK = "ok"
STATUS_INFEASIBLE_BANDWIDTH = "infeasible-bandwidth"
STATUS_ORACLE_SKIPPED = "oracle-skipped"

# Choices the source model leaves open; echoed into summary.json
ARTIFACT_CHOICES = {
    "area_size_m": "square deployment area, default 1000 m",
    "num_vehicles": "default 30",
    "v_slots": "default 5 slots per cluster, alpha = V",
    "b0_hz": "default 180 kHz per bandwidth unit",
    "t_s": "default 1 ms slot",
    "sigma2": "default -174 dBm/Hz",
    "n_max": "default 64 bandwidth units",
    "path_loss": "unit-mean exponential fading times d^-eta, eta = 3, distances clamped to >= 1 m",
    "bandwidth_split": "floor(n_max / M) units per vehicle",
}

METRIC_DEFINITIONS = {
    "jain_index": "Jain's index over per-vehicle gains R_ij * omega_ij, unassigned vehicles count 0",
    "mismanagement_ratio": "unassigned vehicles / M",
    "sum_log_utility": "sum over assigned vehicles of ln(omega_ij / S_j), nats",
    "mean_rate_bits_per_s": "mean omega_ij / T over assigned vehicles",
    "available_clusters_per_vehicle": "mean count of feasible clusters whose terminal announced price is below c + ln(omega_ij); auction only",
    "rounds": "auction rounds including the final round without bids; 0 for other solvers",
}


def replication_seed(base_seed: int, sweep_index: int, replication: int) -> int:
    """64-bit seed of one replication, independent of execution order."""
    sequence = np.random.SeedSequence([base_seed, sweep_index, replication])
    return int(sequence.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class RunRecord:
    """One solver run at one sweep point and replication."""

    sweep_index: int
    sweep_value: Optional[float]
    replication: int
    seed: int
    algorithm: str
    num_vehicles: int
    num_clusters: int
    delta: float
    epsilon: float
    blocklength: Optional[float]
    report: Optional[MetricsReport]
    round_bound: Optional[int] = None
    status: str = STATUS_OK

    def to_row(self, sweep_var: Optional[str]) -> Dict[str, Any]:
        row = {
            "sweep_var": sweep_var,
            "sweep_value": self.sweep_value,
            "sweep_index": self.sweep_index,
            "replication": self.replication,
            "seed": self.seed,
            "algorithm": self.algorithm,
            "num_vehicles": self.num_vehicles,
            "num_clusters": self.num_clusters,
            "delta": self.delta,
            "epsilon": self.epsilon,
            "blocklength": self.blocklength,
            "round_bound": self.round_bound,
            "status": self.status,
        }
        for name in METRIC_FIELDS:
            row[name] = getattr(self.report, name) if self.report else None
        return row


@dataclass
class ReplicationOutput:
    records: List[RunRecord]
    notices: List[str] = field(default_factory=list)
    trace: List[Dict[str, Any]] = field(default_factory=list)


@dataclass
class ExperimentResult:
    rows: List[Dict[str, Any]]
    summary: Dict[str, Any]
    notices: List[str]
    trace: List[Dict[str, Any]]


def sample_instance(
    config: ExperimentConfig, sweep_index: int, replication: int
) -> Tuple[ProblemInstance, int]:
    """Draw the topology and gains of one replication.

    Raises:
        InfeasibleBandwidthError: More vehicles than bandwidth units
    """
    seed = replication_seed(config.run.seed, sweep_index, replication)
    rng = np.random.default_rng(seed)
    scenario = config.scenario
    vehicles, clusters = generate_topology(scenario, rng)
    instance = build_instance(
        vehicles,
        clusters,
        config.channel,
        rng,
        path_loss_exp=scenario.path_loss_exp,
        n_units=scenario.n_units,
        min_distance=scenario.min_distance,
    )
    return instance, seed


def run_replication(
    config: ExperimentConfig,
    sweep_index: int,
    sweep_value: Optional[float],
    replication: int,
) -> ReplicationOutput:
    """Run every configured algorithm on one sampled instance."""
    logger = logging.getLogger("ExperimentRunner")
    point = config.at_sweep_point(sweep_value)
    scenario, channel = point.scenario, point.channel
    seed = replication_seed(point.run.seed, sweep_index, replication)

    def record(algorithm, report=None, status=STATUS_OK, bound=None, blocklength=None):
        return RunRecord(
            sweep_index=sweep_index,
            sweep_value=sweep_value,
            replication=replication,
            seed=seed,
            algorithm=algorithm,
            num_vehicles=scenario.num_vehicles,
            num_clusters=scenario.num_clusters,
            delta=point.auction.delta,
            epsilon=channel.epsilon,
            blocklength=blocklength,
            report=report,
            round_bound=bound,
            status=status,
        )

    output = ReplicationOutput(records=[])
    try:
        instance, _ = sample_instance(point, sweep_index, replication)
    except InfeasibleBandwidthError as e:
        output.notices.append(f"sweep point {sweep_index}: {e}")
        output.records = [
            record(name, status=STATUS_INFEASIBLE_BANDWIDTH) for name in point.run.algorithms
        ]
        return output

    blocklength = channel.blocklength(int(instance.n_alloc[0, 0]))
    for name in point.run.algorithms:
        solver = get_solver(name, point)
        try:
            result = solver.solve(instance)
        except OracleSizeError as e:
            output.notices.append(f"sweep point {sweep_index}, {name}: {e}")
            output.records.append(record(name, status=STATUS_ORACLE_SKIPPED))
            continue
        if result.round_bound is not None and result.rounds > result.round_bound:
            output.notices.append(
                f"sweep point {sweep_index}, replication {replication}, {name}: "
                f"{result.rounds} rounds exceed the bound {result.round_bound}"
            )
        report = evaluate(
            result.instance,
            result.matching,
            rounds=result.rounds,
            available=result.available_clusters_per_vehicle,
        )
        output.records.append(
            record(name, report, bound=result.round_bound, blocklength=blocklength)
        )
        for entry in result.trace:
            output.trace.append(
                {"sweep_index": sweep_index, "replication": replication, "algorithm": name, **entry}
            )
        logger.debug(
            f"point {sweep_index} rep {replication} {name}: "
            f"mismanagement={report.mismanagement_ratio:.3f} rounds={report.rounds}"
        )
    return output


def _run_task(args) -> ReplicationOutput:
    return run_replication(*args)


class ExperimentRunner:
    """Runs the sweep x replication grid and writes the result files."""

    def __init__(self, config: ExperimentConfig, file_manager: Optional[ResultFileManager] = None):
        """Initialize the experiment runner.

        Args:
            config: Validated experiment configuration
            file_manager: Writer for the result files; nothing is written when None
        """
        self.config = config
        self.file_manager = file_manager
        self.logger = logging.getLogger("ExperimentRunner")

    def sweep_points(self) -> List[Tuple[int, Optional[float]]]:
        run = self.config.run
        if run.sweep_var is None:
            return [(0, None)]
        return list(enumerate(run.sweep_grid))

    def _tasks(self) -> List[Tuple[ExperimentConfig, int, Optional[float], int]]:
        return [
            (self.config, index, value, rep)
            for index, value in self.sweep_points()
            for rep in range(self.config.run.replications)
        ]

    def _execute(self, tasks) -> List[ReplicationOutput]:
        threads = self.config.run.threads
        if threads > 1 and len(tasks) > 1:
            self.logger.info(f"Running {len(tasks)} replications on {threads} processes")
            with Pool(processes=threads) as pool:
                return pool.map(_run_task, tasks)
        outputs = []
        points = len(self.sweep_points())
        for task in tasks:
            outputs.append(_run_task(task))
            if task[3] == self.config.run.replications - 1:
                self.logger.info(f"Finished sweep point {task[1] + 1}/{points}")
        return outputs

    def run(self) -> ExperimentResult:
        """Run the experiment and save runs.csv, summary.json and the trace."""
        run = self.config.run
        self.logger.info(
            f"Starting experiment: {len(self.sweep_points())} sweep point(s) x "
            f"{run.replications} replication(s), algorithms {', '.join(run.algorithms)}"
        )
        outputs = self._execute(self._tasks())

        order = {name: k for k, name in enumerate(run.algorithms)}
        records = sorted(
            (r for out in outputs for r in out.records),
            key=lambda r: (r.sweep_index, r.replication, order[r.algorithm]),
        )
        notices = sorted(set(n for out in outputs for n in out.notices))
        trace = [entry for out in outputs for entry in out.trace]

        for notice in notices:
            self.logger.warning(notice)

        rows = [r.to_row(run.sweep_var) for r in records]
        summary = self.summarize(records, notices)

        if self.file_manager is not None:
            self.file_manager.save_runs(rows)
            self.file_manager.save_summary(summary)
            if run.trace:
                self.file_manager.save_trace(trace)

        self.logger.info(f"Experiment finished: {len(rows)} runs")
        return ExperimentResult(rows, summary, notices, trace)

    def summarize(self, records: Sequence[RunRecord], notices: List[str]) -> Dict[str, Any]:
        """Aggregate reports per (sweep point, algorithm) next to the config echo."""
        groups: Dict[Tuple[int, str], List[RunRecord]] = {}
        for r in records:
            groups.setdefault((r.sweep_index, r.algorithm), []).append(r)

        points = []
        for (index, algorithm), members in sorted(groups.items()):
            reports = [m.report for m in members if m.report is not None]
            entry = {
                "sweep_index": index,
                "sweep_value": members[0].sweep_value,
                "algorithm": algorithm,
                "runs": len(members),
                "completed": len(reports),
                "metrics": None,
            }
            if reports:
                entry["metrics"] = {
                    name: summary.to_dict() for name, summary in aggregate(reports).items()
                }
            points.append(entry)

        return {
            "schema_version": SUMMARY_SCHEMA_VERSION,
            "sweep_var": self.config.run.sweep_var,
            "config": self.config.to_dict(),
            "artifact_choices": ARTIFACT_CHOICES,
            "metric_definitions": METRIC_DEFINITIONS,
            "points": points,
            "notices": notices,
        }

    def trace(self, sweep_index: int = 0, replication: int = 0) -> List[Dict[str, Any]]:
        """Run the auction on one replication with per-round tracing and save it."""
        points = self.sweep_points()
        value = points[sweep_index][1] if sweep_index < len(points) else None
        point = self.config.at_sweep_point(value)
        instance, seed = sample_instance(point, sweep_index, replication)
        outcome = run_auction(instance, point.auction.delta, point.auction.c_override, trace=True)
        self.logger.info(
            f"Traced auction with seed {seed}: {outcome.rounds} rounds "
            f"(bound {outcome.round_bound})"
        )
        if self.file_manager is not None:
            self.file_manager.save_trace(outcome.trace)
        return outcome.trace


@dataclass(frozen=True)
class AuditRecord:
    """Auction vs exact max-weight matching on one random small instance."""

    instance: int
    seed: int
    num_vehicles: int
    num_clusters: int
    max_alpha: int
    delta: float
    c_const: float
    auction_value: float
    oracle_value: float
    gap: float
    gap_limit: float
    rounds: int
    round_bound: int
    feasible: bool

    @property
    def within_gap(self) -> bool:
        return self.gap <= self.gap_limit + 1e-9

    @property
    def within_bound(self) -> bool:
        return self.rounds <= self.round_bound

    @property
    def ok(self) -> bool:
        return self.feasible and self.within_gap

    def to_row(self) -> Dict[str, Any]:
        row = {name: getattr(self, name) for name in self.__dataclass_fields__}
        row.update(within_gap=self.within_gap, within_bound=self.within_bound)
        return row


def random_audit_instance(
    rng: np.random.Generator,
    max_vehicles: int = 6,
    max_clusters: int = 3,
    max_slots: int = 3,
    infeasible_share: float = 0.1,
) -> ProblemInstance:
    """Small random instance with rates uniform on [1, 10] and some dead links."""
    m = int(rng.integers(1, max_vehicles + 1))
    n = int(rng.integers(1, max_clusters + 1))
    v_slots = rng.integers(1, max_slots + 1, size=n)
    alphas = np.array([rng.integers(1, v + 1) for v in v_slots])
    rates = rng.uniform(1.0, 10.0, size=(m, n))
    rates[rng.random((m, n)) < infeasible_share] = 0.0
    return ProblemInstance.from_rate_matrix(rates, capacity_alpha=alphas, v_slots=v_slots)


def audit_instance(instance: ProblemInstance, delta: float, index: int = 0, seed: int = 0) -> AuditRecord:
    """Compare the auction to the exact optimum of sum(c + w) on one instance."""
    outcome = run_auction(instance, delta)
    c = outcome.c_const
    edges = expand_graph(instance)
    oracle, oracle_weight = max_weight_matching_oracle(
        edges, instance.num_vehicles, instance.num_clusters, offset=c
    )
    auction_value = matching_weight(outcome.matching, edges) + c * len(outcome.matching.assigned)
    oracle_value = oracle_weight + c * len(oracle.assigned)
    try:
        outcome.matching.validate(instance)
        feasible = True
    except FeasibilityError:
        feasible = False
    return AuditRecord(
        instance=index,
        seed=seed,
        num_vehicles=instance.num_vehicles,
        num_clusters=instance.num_clusters,
        max_alpha=instance.max_alpha,
        delta=delta,
        c_const=c,
        auction_value=auction_value,
        oracle_value=oracle_value,
        gap=oracle_value - auction_value,
        gap_limit=instance.num_vehicles * delta,
        rounds=outcome.rounds,
        round_bound=outcome.round_bound,
        feasible=feasible,
    )


def validate_auction(
    instances: int,
    delta: float,
    seed: int = 0,
    file_manager: Optional[ResultFileManager] = None,
) -> List[AuditRecord]:
    """Oracle gap audit over ``instances`` random small instances."""
    logger = logging.getLogger("ExperimentRunner")
    records = []
    for k in range(instances):
        instance_seed = replication_seed(seed, 0, k)
        instance = random_audit_instance(np.random.default_rng(instance_seed))
        records.append(audit_instance(instance, delta, index=k, seed=instance_seed))

    failures = [r for r in records if not r.ok]
    worst = max((r.gap for r in records), default=0.0)
    logger.info(
        f"Audited {len(records)} instances at delta={delta}: "
        f"{len(failures)} violation(s), worst gap {worst:.3g}"
    )
    for r in failures:
        logger.warning(
            f"Instance {r.instance}: gap {r.gap:.3g} (limit {r.gap_limit:.3g}), "
            f"feasible={r.feasible}"
        )
    for r in records:
        if not r.within_bound:
            logger.warning(f"Instance {r.instance}: {r.rounds} rounds exceed the bound {r.round_bound}")
    if file_manager is not None:
        file_manager.save_validation([r.to_row() for r in records])
    return records


def std_error(std: Optional[float], count: int) -> float:
    """Standard error of a mean from a FieldSummary-style std and count."""
    if std is None or count < 1:
        return math.nan
    return std / math.sqrt(count)
