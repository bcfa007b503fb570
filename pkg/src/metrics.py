"""Evaluation metrics and their aggregation across replications."""

import dataclasses
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.channel import rate_bits_per_second
from src.errors import UndefinedMetricError, ValidationError
from src.matching_graph import Matching, objective_value, offloading_gains
from src.scenario import ProblemInstance


@dataclass(frozen=True)
class MetricsReport:
    """Per-run evaluation of one matching.

    ``jain_index`` is None when no vehicle offloads (the index is undefined),
    ``available_clusters_per_vehicle`` is None for solvers other than the
    auction.
    """

    jain_index: Optional[float]
    mismanagement_ratio: float
    sum_log_utility: float
    mean_rate_bits_per_s: float
    available_clusters_per_vehicle: Optional[float]
    rounds: int


METRIC_FIELDS = [f.name for f in dataclasses.fields(MetricsReport)]


def jain_fairness(gains: Sequence[float]) -> float:
    """Jain's index (sum x)^2 / (n * sum x^2).

    Raises:
        ValidationError: Empty input or a negative gain
        UndefinedMetricError: Every gain is zero
    """
    x = np.asarray(gains, dtype=float)
    if x.size == 0:
        raise ValidationError("jain_fairness needs at least one gain")
    if np.any(x < 0):
        raise ValidationError("jain_fairness gains must be non-negative")
    squares = float(np.square(x).sum())
    if squares == 0:
        raise UndefinedMetricError("Jain's index is undefined when every gain is zero")
    return float(x.sum()) ** 2 / (x.size * squares)


def mismanagement_ratio(matching: Matching, num_vehicles: int) -> float:
    """Share of offloading vehicles left without a cluster."""
    if num_vehicles < 1:
        raise ValidationError(f"num_vehicles must be >= 1, got {num_vehicles}")
    return len(matching.unassigned) / num_vehicles


def available_clusters_per_vehicle(
    instance: ProblemInstance, state, c_const: float
) -> float:
    """Mean number of clusters each vehicle could still profitably bid on.

    A cluster counts for a vehicle when the link is feasible, the cluster
    still announces an open slot and c + ln(omega) exceeds its announced
    price.

    Args:
        instance: Problem instance the auction ran on
        state: Terminated AuctionState
        c_const: Utility offset the auction used
    """
    if instance.num_vehicles == 0:
        return 0.0
    with np.errstate(divide="ignore"):
        utilities = np.where(
            instance.feasible, c_const + np.log(instance.rate_matrix), -np.inf
        )
    prices = state.terminal_prices()
    positive = (utilities - prices[None, :]) > 0
    return float(positive.sum(axis=1).mean())


def mean_rate_bits_per_s(matching: Matching, instance: ProblemInstance) -> float:
    """Mean rate of the selected links over assigned vehicles, in bit/s."""
    assigned = matching.assigned
    if not assigned:
        return 0.0
    rates = [instance.rate_matrix[i, matching.cluster_of(i)] for i in assigned]
    return float(rate_bits_per_second(math.fsum(rates) / len(rates), instance.params))


def evaluate(
    instance: ProblemInstance,
    matching: Matching,
    rounds: int = 0,
    available: Optional[float] = None,
) -> MetricsReport:
    """Compute every metric for one solver run."""
    gains = offloading_gains(matching, instance)
    try:
        jain = jain_fairness(gains)
    except UndefinedMetricError:
        jain = None
    return MetricsReport(
        jain_index=jain,
        mismanagement_ratio=mismanagement_ratio(matching, instance.num_vehicles),
        sum_log_utility=objective_value(matching, instance),
        mean_rate_bits_per_s=mean_rate_bits_per_s(matching, instance),
        available_clusters_per_vehicle=available,
        rounds=rounds,
    )


@dataclass(frozen=True)
class FieldSummary:
    mean: Optional[float]
    std: Optional[float]
    count: int

    def to_dict(self) -> Dict[str, Optional[float]]:
        return {"mean": self.mean, "std": self.std, "count": self.count}


def summarize(values: Sequence[float]) -> FieldSummary:
    """Mean, sample std-dev (0 for a single value) and count.

    Values are sorted before summing so the result does not depend on
    their order.
    """
    ordered = sorted(float(v) for v in values)
    n = len(ordered)
    if n == 0:
        return FieldSummary(None, None, 0)
    mean = math.fsum(ordered) / n
    if n == 1:
        return FieldSummary(mean, 0.0, 1)
    deviations = sorted((v - mean) ** 2 for v in ordered)
    return FieldSummary(mean, math.sqrt(math.fsum(deviations) / (n - 1)), n)


def aggregate(reports: List[MetricsReport]) -> Dict[str, FieldSummary]:
    """Per-field summary over replications; None entries are skipped.

    Raises:
        ValidationError: ``reports`` is empty
    """
    if not reports:
        raise ValidationError("aggregate needs at least one report")
    return {
        name: summarize(
            [getattr(r, name) for r in reports if getattr(r, name) is not None]
        )
        for name in METRIC_FIELDS
    }
