"""Nearest-cluster baseline."""

from typing import List, Optional

import numpy as np

from src.matching_graph import Matching
from src.scenario import ProblemInstance
from src.solvers.base_solver import BaseSolver, SolverResult, to_infinite_blocklength


def nearest_cluster(instance: ProblemInstance, enforce_capacity: bool = True) -> Matching:
    """Greedy geographic assignment.

    Vehicles are processed in ascending id order and each joins the closest
    feasible cluster head that still has room (S_j < alpha_j). Equal
    distances go to the lower cluster id. With ``enforce_capacity`` off the
    room check is skipped.
    """
    distances = instance.distances
    capacities = instance.capacities
    counts = np.zeros(instance.num_clusters, dtype=int)
    choices: List[Optional[int]] = []
    for i in range(instance.num_vehicles):
        choice = None
        for j in np.argsort(distances[i], kind="stable"):
            if instance.rate_matrix[i, j] <= 0:
                continue
            if enforce_capacity and counts[j] >= capacities[j]:
                continue
            choice = int(j)
            break
        if choice is not None:
            counts[choice] += 1
        choices.append(choice)
    return Matching.from_cluster_choices(choices, instance.num_clusters)


class NearestClusterSolver(BaseSolver):
    """Each vehicle offloads to the closest cluster head with room."""

    name = "nearest"

    def _solve(self, instance: ProblemInstance) -> SolverResult:
        enforce = self.config.baseline.enforce_capacity
        return SolverResult(
            matching=nearest_cluster(instance, enforce_capacity=enforce),
            enforce_capacity=enforce,
        )


class InfiniteBlocklengthNearestSolver(NearestClusterSolver):
    name = "nearest-infinite"

    def prepare(self, instance: ProblemInstance) -> ProblemInstance:
        return to_infinite_blocklength(instance)
