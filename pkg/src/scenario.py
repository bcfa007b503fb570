"""Topology generation and offloading problem instances."""

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.channel import ChannelParams, dbm_to_watts, rate_matrix, sample_rayleigh_gain
from src.config import ScenarioConfig
from src.errors import InfeasibleBandwidthError, ValidationError

logger = logging.getLogger("scenario")


@dataclass(frozen=True)
class Vehicle:
    """An offloading vehicle. ``task`` is an opaque label for its mining task."""

    id: int
    position: Tuple[float, float]
    tx_power: float
    task: str = ""

    def __post_init__(self) -> None:
        if not self.tx_power > 0:
            raise ValidationError(f"Vehicle {self.id}: tx_power must be > 0")


@dataclass(frozen=True)
class MiningCluster:
    """A mining cluster fronted by its head at ``position``."""

    id: int
    position: Tuple[float, float]
    v_slots: int
    capacity_alpha: int

    def __post_init__(self) -> None:
        if self.v_slots < 1:
            raise ValidationError(f"Cluster {self.id}: v_slots must be >= 1")
        if not 1 <= self.capacity_alpha <= self.v_slots:
            raise ValidationError(
                f"Cluster {self.id}: capacity_alpha must satisfy 1 <= alpha <= V, "
                f"got alpha={self.capacity_alpha}, V={self.v_slots}"
            )


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """One realised offloading epoch.

    Attributes:
        vehicles: Vehicles ordered by id 0..M-1
        clusters: Clusters ordered by id 0..N-1
        params: Channel constants the rates were computed with
        rate_matrix: M x N rates in bits per slot, 0 marks an infeasible link
        n_alloc: M x N bandwidth units per link
        gains: M x N |h|^2 draws, kept so other channel settings can be applied
    """

    vehicles: Tuple[Vehicle, ...]
    clusters: Tuple[MiningCluster, ...]
    params: ChannelParams
    rate_matrix: np.ndarray
    n_alloc: np.ndarray
    gains: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        m, n = len(self.vehicles), len(self.clusters)
        if [v.id for v in self.vehicles] != list(range(m)):
            raise ValidationError("Vehicle ids must be 0..M-1 in order")
        if [c.id for c in self.clusters] != list(range(n)):
            raise ValidationError("Cluster ids must be 0..N-1 in order")
        if self.rate_matrix.shape != (m, n) or self.n_alloc.shape != (m, n):
            raise ValidationError(
                f"rate_matrix and n_alloc must be {m}x{n}, got "
                f"{self.rate_matrix.shape} and {self.n_alloc.shape}"
            )
        if np.any(~np.isfinite(self.rate_matrix)) or np.any(self.rate_matrix < 0):
            raise ValidationError("rate_matrix entries must be finite and >= 0")
        # Each vehicle uses at most one link, so its largest allocation bounds its share
        if m and int(self.n_alloc.max(axis=1).sum()) > self.params.n_max:
            raise InfeasibleBandwidthError(
                f"Bandwidth allocation exceeds n_max={self.params.n_max}"
            )
        self.rate_matrix.setflags(write=False)
        self.n_alloc.setflags(write=False)

    @property
    def num_vehicles(self) -> int:
        return len(self.vehicles)

    @property
    def num_clusters(self) -> int:
        return len(self.clusters)

    @property
    def feasible(self) -> np.ndarray:
        """Boolean M x N mask of links with a positive rate."""
        return self.rate_matrix > 0

    @property
    def capacities(self) -> np.ndarray:
        return np.array([c.capacity_alpha for c in self.clusters], dtype=int)

    @property
    def max_alpha(self) -> int:
        return int(self.capacities.max()) if self.clusters else 0

    @property
    def distances(self) -> np.ndarray:
        """Euclidean vehicle-to-cluster-head distances, M x N (m)."""
        return pairwise_distances(self.vehicles, self.clusters)

    def with_params(self, params: ChannelParams) -> "ProblemInstance":
        """Recompute the rate matrix on the same gains under new channel constants."""
        if self.gains is None:
            raise ValidationError("Instance carries no gains to re-evaluate")
        tx_power = np.array([v.tx_power for v in self.vehicles])
        rates = rate_matrix(params, self.gains, tx_power, self.n_alloc)
        return dataclasses.replace(self, params=params, rate_matrix=rates)

    @classmethod
    def from_rate_matrix(
        cls,
        rates,
        capacity_alpha=1,
        v_slots=None,
        params: Optional[ChannelParams] = None,
        vehicle_positions=None,
        cluster_positions=None,
    ) -> "ProblemInstance":
        """Build an instance directly from a rate matrix.

        Args:
            rates: M x N rates in bits per slot
            capacity_alpha: Scalar or per-cluster capacity
            v_slots: Scalar or per-cluster slot count, defaults to capacity_alpha
            params: Channel constants, defaults to ChannelParams()
            vehicle_positions: Optional M x 2 positions, origin by default
            cluster_positions: Optional N x 2 positions, origin by default

        Returns:
            ProblemInstance with one bandwidth unit per link
        """
        rates = np.array(rates, dtype=float, ndmin=2)
        m, n = rates.shape
        alphas = np.broadcast_to(np.asarray(capacity_alpha, dtype=int), (n,))
        slots = alphas if v_slots is None else np.broadcast_to(np.asarray(v_slots), (n,))
        vpos = np.zeros((m, 2)) if vehicle_positions is None else np.asarray(vehicle_positions, float)
        cpos = np.zeros((n, 2)) if cluster_positions is None else np.asarray(cluster_positions, float)
        vehicles = tuple(
            Vehicle(id=i, position=tuple(vpos[i]), tx_power=1.0, task=f"task-{i}")
            for i in range(m)
        )
        clusters = tuple(
            MiningCluster(
                id=j,
                position=tuple(cpos[j]),
                v_slots=int(slots[j]),
                capacity_alpha=int(alphas[j]),
            )
            for j in range(n)
        )
        params = params or ChannelParams(n_max=max(64, m))
        return cls(
            vehicles=vehicles,
            clusters=clusters,
            params=params,
            rate_matrix=rates,
            n_alloc=np.ones((m, n), dtype=int),
        )


def pairwise_distances(
    vehicles: Sequence[Vehicle], clusters: Sequence[MiningCluster]
) -> np.ndarray:
    vpos = np.array([v.position for v in vehicles], dtype=float).reshape(-1, 2)
    cpos = np.array([c.position for c in clusters], dtype=float).reshape(-1, 2)
    return np.linalg.norm(vpos[:, None, :] - cpos[None, :, :], axis=-1)


def generate_topology(
    config: ScenarioConfig, rng: np.random.Generator
) -> Tuple[List[Vehicle], List[MiningCluster]]:
    """Place vehicles and cluster heads uniformly over the square area.

    Vehicle positions are drawn first, then cluster positions, each as an
    (x, y) pair per node.

    Raises:
        ValidationError: Any dimension is non-positive or alpha exceeds V
    """
    problems = config.problems()
    if problems:
        raise ValidationError("; ".join(problems))

    tx_power = dbm_to_watts(config.tx_power_dbm)
    vpos = rng.uniform(0.0, config.area_size, size=(config.num_vehicles, 2))
    cpos = rng.uniform(0.0, config.area_size, size=(config.num_clusters, 2))

    vehicles = [
        Vehicle(id=i, position=(float(x), float(y)), tx_power=tx_power, task=f"task-{i}")
        for i, (x, y) in enumerate(vpos)
    ]
    clusters = [
        MiningCluster(
            id=j,
            position=(float(x), float(y)),
            v_slots=config.v_slots,
            capacity_alpha=config.alpha,
        )
        for j, (x, y) in enumerate(cpos)
    ]
    return vehicles, clusters


def allocate_bandwidth(num_vehicles: int, n_max: int) -> int:
    """Uniform split: every offloading vehicle gets floor(n_max / M) units.

    Raises:
        ValidationError: num_vehicles < 1
        InfeasibleBandwidthError: More vehicles than bandwidth units
    """
    if num_vehicles < 1:
        raise ValidationError(f"Number of vehicles must be >= 1, got {num_vehicles}")
    if num_vehicles > n_max:
        raise InfeasibleBandwidthError(
            f"{num_vehicles} vehicles cannot share {n_max} bandwidth units"
        )
    return n_max // num_vehicles


def build_instance(
    vehicles: Sequence[Vehicle],
    clusters: Sequence[MiningCluster],
    params: ChannelParams,
    rng: np.random.Generator,
    path_loss_exp: float = 3.0,
    gains: Optional[np.ndarray] = None,
    n_units: Optional[int] = None,
    min_distance: float = 1.0,
) -> ProblemInstance:
    """Sample the link gains and evaluate the rate of every vehicle/cluster pair.

    Args:
        vehicles: Vehicles ordered by id
        clusters: Clusters ordered by id
        params: Channel constants
        rng: Random stream, consumed row-major (vehicle, then cluster)
        path_loss_exp: Path-loss exponent eta
        gains: Optional M x N |h|^2 matrix used instead of sampling
        n_units: Optional per-link allocation overriding the uniform split
        min_distance: Distances are clamped to at least this value (m)

    Returns:
        ProblemInstance with zero-rate links marked infeasible
    """
    m, n = len(vehicles), len(clusters)
    units = allocate_bandwidth(m, params.n_max) if n_units is None else n_units
    if units < 1:
        raise ValidationError(f"n_units must be >= 1, got {units}")
    if m * units > params.n_max:
        raise InfeasibleBandwidthError(
            f"{m} vehicles x {units} units exceeds n_max={params.n_max}"
        )

    if gains is None:
        distances = np.maximum(pairwise_distances(vehicles, clusters), min_distance)
        gains = sample_rayleigh_gain(rng, distances, path_loss_exp)
    else:
        gains = np.array(gains, dtype=float)
        if gains.shape != (m, n):
            raise ValidationError(f"gains must be {m}x{n}, got {gains.shape}")

    n_alloc = np.full((m, n), units, dtype=int)
    tx_power = np.array([v.tx_power for v in vehicles], dtype=float)
    rates = rate_matrix(params, gains, tx_power, n_alloc)

    infeasible = int((rates <= 0).sum())
    if infeasible:
        logger.debug(f"{infeasible} of {m * n} links have zero rate")

    return ProblemInstance(
        vehicles=tuple(vehicles),
        clusters=tuple(clusters),
        params=params,
        rate_matrix=rates,
        n_alloc=n_alloc,
        gains=gains,
    )
