"""Exact reference solvers used to validate the auction."""

import itertools
import math
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from src.errors import OracleSizeError
from src.matching_graph import ExpandedEdge, Matching
from src.scenario import ProblemInstance
from src.solvers.base_solver import BaseSolver, SolverResult

MAX_ENUMERATED_MAPS = 10**7
MAX_ORACLE_CELLS = 4 * 10**6

# Finite stand-in for a missing edge; never chosen while dummy columns exist
_FORBIDDEN = -1e12


def brute_force_optimal(
    instance: ProblemInstance, max_maps: int = MAX_ENUMERATED_MAPS
) -> Tuple[Matching, float]:
    """Enumerate every vehicle -> cluster-or-unassigned map.

    Maps are compared first on the number of assigned vehicles, then on the
    offloading objective sum(ln(omega / S_j)). The first map in
    enumeration order wins ties. Each vehicle's options are its feasible
    clusters in ascending id order followed by "unassigned".

    Args:
        instance: Problem instance
        max_maps: Guard on (N + 1)^M

    Returns:
        (Matching, objective)

    Raises:
        OracleSizeError: (N + 1)^M exceeds ``max_maps``
    """
    m, n = instance.num_vehicles, instance.num_clusters
    if (n + 1) ** m > max_maps:
        raise OracleSizeError(
            f"Exhaustive search over (N+1)^M = {n + 1}^{m} maps exceeds {max_maps}"
        )

    with np.errstate(divide="ignore"):
        log_rates = np.log(instance.rate_matrix)
    capacities = instance.capacities.tolist()
    options = [
        [int(j) for j in np.nonzero(instance.feasible[i])[0]] + [-1] for i in range(m)
    ]

    best_key = None
    best_choice: Sequence[int] = [-1] * m
    for choice in itertools.product(*options):
        counts = [0] * n
        for j in choice:
            if j >= 0:
                counts[j] += 1
        if any(counts[j] > capacities[j] for j in range(n)):
            continue
        assigned = m - choice.count(-1)
        objective = math.fsum(
            log_rates[i, j] - math.log(counts[j]) for i, j in enumerate(choice) if j >= 0
        )
        key = (assigned, objective)
        if best_key is None or key > best_key:
            best_key, best_choice = key, choice

    matching = Matching.from_cluster_choices(list(best_choice), n)
    return matching, (best_key[1] if best_key else 0.0)


def max_weight_matching_oracle(
    edges: Sequence[ExpandedEdge],
    num_vehicles: int,
    num_clusters: int,
    offset: float = 0.0,
) -> Tuple[Matching, float]:
    """Exact maximum-weight matching of vehicles to slot nodes.

    Solved as a rectangular assignment with one zero-valued dummy column
    per vehicle, so leaving a vehicle out is always allowed. ``offset`` is
    added to every real edge before optimising; the returned weight is the
    plain sum of the chosen edge weights.

    Args:
        edges: Expanded slot graph
        num_vehicles: M
        num_clusters: N
        offset: Constant added to every edge weight

    Returns:
        (Matching, weight)

    Raises:
        OracleSizeError: The assignment matrix would be too large
    """
    slots: List[Tuple[int, int]] = sorted({(e.cluster_id, e.slot_index) for e in edges})
    if not edges or num_vehicles == 0:
        return Matching.empty(num_vehicles, num_clusters), 0.0
    columns = len(slots) + num_vehicles
    if num_vehicles * columns > MAX_ORACLE_CELLS:
        raise OracleSizeError(
            f"Assignment matrix {num_vehicles}x{columns} exceeds {MAX_ORACLE_CELLS} cells"
        )

    column_of: Dict[Tuple[int, int], int] = {slot: k for k, slot in enumerate(slots)}
    value = np.full((num_vehicles, columns), _FORBIDDEN)
    value[:, len(slots):] = 0.0
    weights = {}
    for e in edges:
        k = column_of[(e.cluster_id, e.slot_index)]
        value[e.vehicle_id, k] = e.weight + offset
        weights[(e.vehicle_id, k)] = e.weight

    rows, cols = linear_sum_assignment(value, maximize=True)
    assignment = {}
    total = 0.0
    for i, k in zip(rows.tolist(), cols.tolist()):
        if k < len(slots) and (i, k) in weights:
            assignment[i] = slots[k]
            total += weights[(i, k)]
    return Matching(assignment, num_vehicles, num_clusters), total


class BruteForceSolver(BaseSolver):
    """Exhaustive optimum of the offloading objective, small instances only."""

    name = "bruteforce"

    def _solve(self, instance: ProblemInstance) -> SolverResult:
        matching, objective = brute_force_optimal(
            instance, max_maps=self.config.run.oracle_max_maps
        )
        return SolverResult(matching=matching, objective=objective)
