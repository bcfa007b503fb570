"""Vehicle-to-slot bipartite graph and the offloading objective.

Cluster j is expanded into slot nodes s = 1..alpha_j. Filling slots
1..S in order telescopes the slot weights to sum(ln(omega_i / S)), the
utility of splitting the cluster equally among S vehicles.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.special import xlogy

from src.errors import DegenerateObjectiveError, FeasibilityError, GraphConsistencyError
from src.scenario import ProblemInstance

logger = logging.getLogger("matching_graph")

Slot = Tuple[int, int]  # (cluster_id, slot_index)


def slot_price(s) -> float:
    """-ln(Xi / s^s) = s ln s - (s-1) ln(s-1), with 0^0 = 1.

    This is both the initial auction price of slot s and the amount the
    slot's edge weight falls below ln(omega).
    """
    s = np.asarray(s, dtype=float)
    price = xlogy(s, s) - xlogy(s - 1.0, s - 1.0)
    return float(price) if price.ndim == 0 else price


def edge_weight(omega: float, s: int) -> float:
    """w^s = ln(omega * Xi / s^s) in nats."""
    return float(np.log(omega)) - slot_price(s)


@dataclass(frozen=True)
class ExpandedEdge:
    vehicle_id: int
    cluster_id: int
    slot_index: int
    weight: float


def expand_graph(instance: ProblemInstance) -> List[ExpandedEdge]:
    """Every feasible (vehicle, cluster, slot) edge, ordered by vehicle, cluster, slot."""
    edges = []
    prices = slot_price(np.arange(1, instance.max_alpha + 1)) if instance.max_alpha else []
    for i in range(instance.num_vehicles):
        for cluster in instance.clusters:
            omega = instance.rate_matrix[i, cluster.id]
            if omega <= 0:
                continue
            log_omega = float(np.log(omega))
            for s in range(1, min(cluster.v_slots, cluster.capacity_alpha) + 1):
                edges.append(
                    ExpandedEdge(i, cluster.id, s, log_omega - float(prices[s - 1]))
                )
    logger.debug(f"Expanded graph has {len(edges)} edges")
    return edges


@dataclass(frozen=True)
class Matching:
    """Final assignment of vehicles to cluster slots.

    Attributes:
        assignment: vehicle_id -> (cluster_id, slot_index); unassigned
            vehicles are absent
        num_vehicles: M
        num_clusters: N
    """

    assignment: Mapping[int, Slot]
    num_vehicles: int
    num_clusters: int

    @classmethod
    def empty(cls, num_vehicles: int, num_clusters: int) -> "Matching":
        return cls({}, num_vehicles, num_clusters)

    @classmethod
    def from_cluster_choices(
        cls, choices: Sequence[Optional[int]], num_clusters: int
    ) -> "Matching":
        """Give each cluster's vehicles slots 1, 2, ... in ascending vehicle id.

        Args:
            choices: Per-vehicle cluster id, or None/-1 when unassigned
            num_clusters: N
        """
        assignment = {}
        fill = [0] * num_clusters
        for i, j in enumerate(choices):
            if j is None or j < 0:
                continue
            fill[j] += 1
            assignment[i] = (int(j), fill[j])
        return cls(assignment, len(choices), num_clusters)

    def cluster_of(self, vehicle_id: int) -> Optional[int]:
        slot = self.assignment.get(vehicle_id)
        return None if slot is None else slot[0]

    @property
    def assigned(self) -> List[int]:
        return sorted(self.assignment)

    @property
    def unassigned(self) -> List[int]:
        return [i for i in range(self.num_vehicles) if i not in self.assignment]

    @property
    def phi(self) -> np.ndarray:
        """M x N 0/1 offloading indicator."""
        phi = np.zeros((self.num_vehicles, self.num_clusters), dtype=int)
        for i, (j, _) in self.assignment.items():
            phi[i, j] = 1
        return phi

    @property
    def s_counts(self) -> np.ndarray:
        """Number of vehicles S_j on each cluster."""
        counts = np.zeros(self.num_clusters, dtype=int)
        for j, _ in self.assignment.values():
            counts[j] += 1
        return counts

    def resource_shares(self) -> np.ndarray:
        """M x N matrix of R_{i,j} = 1/S_j on assigned pairs, 0 elsewhere."""
        counts = self.s_counts
        shares = np.zeros((self.num_vehicles, self.num_clusters))
        for i, (j, _) in self.assignment.items():
            shares[i, j] = 1.0 / counts[j]
        return shares

    def validate(self, instance: ProblemInstance, enforce_capacity: bool = True) -> None:
        """Check the single-cluster, slot-exclusivity, capacity and link constraints.

        Raises:
            FeasibilityError: On the first violated constraint
        """
        if self.num_vehicles != instance.num_vehicles or self.num_clusters != instance.num_clusters:
            raise FeasibilityError(
                f"Matching is {self.num_vehicles}x{self.num_clusters}, instance is "
                f"{instance.num_vehicles}x{instance.num_clusters}"
            )
        holders: Dict[Slot, int] = {}
        for i, (j, s) in self.assignment.items():
            if not 0 <= i < self.num_vehicles:
                raise FeasibilityError(f"Unknown vehicle {i}")
            if not 0 <= j < self.num_clusters:
                raise FeasibilityError(f"Vehicle {i} assigned to unknown cluster {j}")
            if s < 1 or (enforce_capacity and s > instance.clusters[j].capacity_alpha):
                raise FeasibilityError(f"Vehicle {i} holds invalid slot {s} of cluster {j}")
            if (j, s) in holders:
                raise FeasibilityError(
                    f"Slot {s} of cluster {j} held by vehicles {holders[(j, s)]} and {i}"
                )
            holders[(j, s)] = i
            if instance.rate_matrix[i, j] <= 0:
                raise FeasibilityError(f"Vehicle {i} assigned over infeasible link to {j}")
        if enforce_capacity:
            over = np.nonzero(self.s_counts > instance.capacities)[0]
            if over.size:
                raise FeasibilityError(f"Clusters over capacity: {over.tolist()}")
        shares = self.resource_shares().sum(axis=0)
        if np.any(shares > 1.0 + 1e-12):
            raise FeasibilityError("A cluster hands out more than its full resources")


def offloading_gains(matching: Matching, instance: ProblemInstance) -> np.ndarray:
    """Per-vehicle realised gain R_{i,j} * omega_{i,j}; 0 for unassigned vehicles."""
    return (matching.resource_shares() * instance.rate_matrix).sum(axis=1)


def objective_value(matching: Matching, instance: ProblemInstance) -> float:
    """Global offloading utility sum(ln(R_{i,j} * omega_{i,j})) over assigned vehicles.

    Unassigned vehicles are left out of the sum.

    Raises:
        DegenerateObjectiveError: An assigned vehicle sits on a zero-rate link
    """
    counts = matching.s_counts
    total = 0.0
    for i in matching.assigned:
        j, _ = matching.assignment[i]
        omega = instance.rate_matrix[i, j]
        if omega <= 0:
            raise DegenerateObjectiveError(
                f"Vehicle {i} is assigned to cluster {j} over a zero-rate link"
            )
        total += float(np.log(omega / counts[j]))
    return total


def edge_index(edges: Iterable[ExpandedEdge]) -> Dict[Tuple[int, int, int], float]:
    return {(e.vehicle_id, e.cluster_id, e.slot_index): e.weight for e in edges}


def matching_weight(matching: Matching, edges) -> float:
    """Sum of the slot-edge weights the matching uses.

    Args:
        matching: Matching to score
        edges: List of ExpandedEdge, or a mapping built by ``edge_index``

    Raises:
        GraphConsistencyError: The matching uses an edge absent from the graph
    """
    weights = edges if isinstance(edges, dict) else edge_index(edges)
    total = 0.0
    for i in matching.assigned:
        j, s = matching.assignment[i]
        try:
            total += weights[(i, j, s)]
        except KeyError:
            raise GraphConsistencyError(
                f"Vehicle {i} uses slot {s} of cluster {j}, which is not in the graph"
            ) from None
    return total
