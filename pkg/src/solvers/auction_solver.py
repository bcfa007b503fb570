"""Distributed auction for mining-cluster selection.

Clusters announce the cheapest open slot, every unassigned vehicle bids
for the cluster with the best margin, and each cluster hands its slot to
the highest bidder, raising the slot price by the winning bid. Rounds
repeat until no vehicle bids.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from src.errors import (
    AuctionDivergenceError,
    AuctionProtocolError,
    ValidationError,
)
from src.matching_graph import Matching, slot_price
from src.metrics import available_clusters_per_vehicle
from src.scenario import MiningCluster, ProblemInstance
from src.solvers.base_solver import BaseSolver, SolverResult, to_infinite_blocklength

logger = logging.getLogger("auction")

Announcement = Tuple[float, int]  # (price, slot_index)


@dataclass(frozen=True)
class Bid:
    vehicle_id: int
    cluster_id: int
    amount: float

    def __post_init__(self) -> None:
        if not self.amount > 0:
            raise ValidationError(f"Bid amount must be > 0, got {self.amount}")


@dataclass
class RoundRecord:
    """What happened in one auction round."""

    round: int
    bids: List[Bid]
    winners: List[Bid]
    displaced: List[int]
    prices: Optional[List[List[float]]] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "round": self.round,
            "bids": [[b.vehicle_id, b.cluster_id, b.amount] for b in self.bids],
            "winners": [
                {"vehicle": b.vehicle_id, "cluster": b.cluster_id, "amount": b.amount}
                for b in self.winners
            ],
            "displaced": list(self.displaced),
            "prices": self.prices,
        }


def utility_matrix(instance: ProblemInstance, c_const: float) -> np.ndarray:
    """U_{i,j} = c + ln(omega_{i,j}); -inf on infeasible links."""
    with np.errstate(divide="ignore"):
        logs = np.log(instance.rate_matrix)
    return np.where(instance.feasible, c_const + logs, -np.inf)


def init_prices(cluster: MiningCluster) -> np.ndarray:
    """Initial slot prices s ln s - (s-1) ln(s-1) for s = 1..alpha."""
    return np.atleast_1d(slot_price(np.arange(1, cluster.capacity_alpha + 1)))


def utility_offset(instance: ProblemInstance, c_override: Optional[float] = None) -> float:
    """The constant c: one nat above the largest initial slot price.

    Raises:
        ValidationError: c_override does not exceed the largest initial price
    """
    max_initial = slot_price(max(instance.max_alpha, 1))
    if c_override is None:
        return max_initial + 1.0
    if not c_override > max_initial:
        raise ValidationError(
            f"c_override must exceed the largest initial price {max_initial:.6f}, "
            f"got {c_override}"
        )
    return float(c_override)


def round_bound_for(max_utility: float, alpha: int, delta: float) -> int:
    """ceil(max_utility * alpha / delta), at least 1."""
    if not delta > 0:
        raise ValidationError(f"delta must be > 0, got {delta}")
    return max(1, math.ceil(max_utility * alpha / delta))


def round_bound(instance: ProblemInstance, delta: float, c_const: float) -> int:
    """Round ceiling from the largest utility and the largest cluster capacity."""
    utilities = utility_matrix(instance, c_const)
    finite = utilities[np.isfinite(utilities)]
    if finite.size == 0:
        return round_bound_for(0.0, instance.max_alpha, delta)
    return round_bound_for(float(finite.max()), instance.max_alpha, delta)


@dataclass
class AuctionState:
    """Prices and temporary assignments shared by all clusters.

    Attributes:
        slot_prices: Per cluster, prices of slots 1..alpha (index s-1)
        holders: Per cluster, vehicle holding each slot or None
        temp_assignment: vehicle_id -> (cluster_id, slot_index)
        unassigned_pool: Vehicles without a slot
        utilities: M x N utilities, -inf where the link is infeasible
        ceilings: Per cluster, largest utility among vehicles that can reach it
        delta: Minimum bid increment (nats)
        c_const: Utility offset (nats)
        round: Rounds started so far
        announcements: Current (price, slot) of every cluster with an open slot
        announced_prices: The same prices as a vector, +inf for withdrawn clusters
    """

    slot_prices: List[np.ndarray]
    holders: List[List[Optional[int]]]
    temp_assignment: Dict[int, Tuple[int, int]]
    unassigned_pool: Set[int]
    utilities: np.ndarray
    ceilings: np.ndarray
    delta: float
    c_const: float
    round: int = 0
    announcements: Dict[int, Announcement] = field(default_factory=dict)
    announced_prices: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def initial(
        cls, instance: ProblemInstance, delta: float, c_const: float
    ) -> "AuctionState":
        if not delta > 0:
            raise ValidationError(f"delta must be > 0, got {delta}")
        utilities = utility_matrix(instance, c_const)
        if instance.num_vehicles:
            ceilings = utilities.max(axis=0)
        else:
            ceilings = np.full(instance.num_clusters, -np.inf)
        state = cls(
            slot_prices=[init_prices(c) for c in instance.clusters],
            holders=[[None] * c.capacity_alpha for c in instance.clusters],
            temp_assignment={},
            unassigned_pool=set(range(instance.num_vehicles)),
            utilities=utilities,
            ceilings=ceilings,
            delta=float(delta),
            c_const=float(c_const),
            announced_prices=np.full(instance.num_clusters, np.inf),
        )
        for cluster in instance.clusters:
            state.refresh_announcement(cluster.id)
        return state

    def min_open_price(self, cluster_id: int) -> Optional[Announcement]:
        """Cheapest slot still priced below the cluster's ceiling, ties to the smaller s."""
        prices = self.slot_prices[cluster_id]
        is_open = prices < self.ceilings[cluster_id]
        if not is_open.any():
            return None
        k = int(np.argmin(np.where(is_open, prices, np.inf)))
        return float(prices[k]), k + 1

    def refresh_announcement(self, cluster_id: int) -> None:
        announcement = self.min_open_price(cluster_id)
        if announcement is None:
            self.announcements.pop(cluster_id, None)
            self.announced_prices[cluster_id] = np.inf
        else:
            self.announcements[cluster_id] = announcement
            self.announced_prices[cluster_id] = announcement[0]

    def terminal_prices(self) -> np.ndarray:
        """Announced price per cluster, +inf for clusters that withdrew."""
        return self.announced_prices.copy()

    def to_matching(self, num_vehicles: int) -> Matching:
        return Matching(dict(self.temp_assignment), num_vehicles, len(self.slot_prices))


def divergence_limit(state: AuctionState) -> int:
    """Rounds after which the auction cannot still be making progress.

    Every round with bids awards at least one slot and raises its price by
    at least delta, and a slot is only announced while its price sits below
    the cluster's ceiling. Each slot therefore wins at most
    ceil((ceiling - initial price) / delta) times, plus one for rounding of
    the price updates. The final round draws no bid.
    """
    wins = 0
    for ceiling, prices in zip(state.ceilings, state.slot_prices):
        if not math.isfinite(ceiling):
            continue
        for price in prices:
            if price < ceiling:
                wins += math.ceil((ceiling - price) / state.delta) + 1
    return wins + 1


def announce_price(state: AuctionState, cluster: MiningCluster) -> Optional[Announcement]:
    """Minimum price over the cluster's open slots and its slot index.

    Returns:
        (price, slot_index), or None when the cluster withdraws because no
        slot is priced below its ceiling
    """
    return state.min_open_price(cluster.id)


def compute_bid(
    vehicle_id: int,
    announcements: Dict[int, Announcement],
    utilities: Sequence[float],
    delta: float,
) -> Optional[Bid]:
    """Bid of one unassigned vehicle.

    Margins are utility minus announced price over the announcing clusters
    the vehicle can reach. The bid goes to the best margin (lowest cluster
    id on ties) and is worth the gap to the second-best margin, where not
    offloading counts as margin 0, but never less than delta. A vehicle
    with a single reachable cluster bids delta.

    Args:
        vehicle_id: Bidding vehicle
        announcements: cluster_id -> (price, slot_index)
        utilities: The vehicle's utility row, -inf on infeasible links
        delta: Minimum bid increment

    Returns:
        Bid, or None when no reachable cluster offers a positive margin
    """
    best_j = None
    best = -math.inf
    second = -math.inf
    reachable = 0
    for j in sorted(announcements):
        utility = utilities[j]
        if not math.isfinite(utility):
            continue
        reachable += 1
        margin = utility - announcements[j][0]
        if margin > best:
            second = best
            best, best_j = margin, j
        elif margin > second:
            second = margin
    if best_j is None or best <= 0:
        return None
    if reachable < 2:
        return Bid(vehicle_id, best_j, delta)
    return Bid(vehicle_id, best_j, max(best - max(second, 0.0), delta))


def collect_bids(state: AuctionState) -> List[Bid]:
    """Bids of every unassigned vehicle, in ascending vehicle id.

    Vectorised form of ``compute_bid`` over the unassigned pool; both apply
    the same arithmetic so they produce identical amounts.
    """
    pool = np.array(sorted(state.unassigned_pool), dtype=int)
    if pool.size == 0 or not state.announcements:
        return []
    utilities = state.utilities[pool]
    reachable = np.isfinite(utilities) & np.isfinite(state.announced_prices)[None, :]
    margins = np.where(reachable, utilities - state.announced_prices[None, :], -np.inf)
    best_j = np.argmax(margins, axis=1)
    rows = np.arange(pool.size)
    best = margins[rows, best_j]
    margins[rows, best_j] = -np.inf
    second = margins.max(axis=1)
    amounts = np.where(
        reachable.sum(axis=1) < 2,
        state.delta,
        np.maximum(best - np.maximum(second, 0.0), state.delta),
    )
    return [
        Bid(int(pool[k]), int(best_j[k]), float(amounts[k]))
        for k in np.nonzero(best > 0)[0]
    ]


def resolve_round(state: AuctionState, bids: Sequence[Bid]) -> RoundRecord:
    """Award each bid-on cluster's announced slot to its highest bidder.

    Mutates ``state`` in place: the winner takes the slot, the previous
    holder returns to the unassigned pool and the slot price rises by the
    winning bid.

    Raises:
        AuctionProtocolError: A bid names a cluster that did not announce,
            or comes from a vehicle that already holds a slot
    """
    by_cluster: Dict[int, List[Bid]] = {}
    for bid in bids:
        if bid.cluster_id not in state.announcements:
            raise AuctionProtocolError(
                f"Vehicle {bid.vehicle_id} bid on cluster {bid.cluster_id}, "
                f"which made no announcement this round"
            )
        if bid.vehicle_id not in state.unassigned_pool:
            raise AuctionProtocolError(
                f"Vehicle {bid.vehicle_id} bid while holding a slot"
            )
        by_cluster.setdefault(bid.cluster_id, []).append(bid)

    winners, displaced = [], []
    for j in sorted(by_cluster):
        winner = min(by_cluster[j], key=lambda b: (-b.amount, b.vehicle_id))
        _, s = state.announcements[j]
        previous = state.holders[j][s - 1]
        if previous is not None:
            del state.temp_assignment[previous]
            state.unassigned_pool.add(previous)
            displaced.append(previous)
        state.holders[j][s - 1] = winner.vehicle_id
        state.temp_assignment[winner.vehicle_id] = (j, s)
        state.unassigned_pool.discard(winner.vehicle_id)
        state.slot_prices[j][s - 1] += winner.amount
        state.refresh_announcement(j)
        winners.append(winner)

    return RoundRecord(state.round, list(bids), winners, displaced)


@dataclass
class AuctionOutcome:
    matching: Matching
    rounds: int
    round_bound: int
    c_const: float
    state: AuctionState
    trace: List[Dict[str, Any]] = field(default_factory=list)


def run_auction(
    instance: ProblemInstance,
    delta: float,
    c_override: Optional[float] = None,
    trace: bool = False,
) -> AuctionOutcome:
    """Run synchronous auction rounds until a round draws no bid.

    Every loop iteration counts as a round, including the last one in
    which nobody bids.

    Args:
        instance: Problem instance
        delta: Minimum bid increment, > 0
        c_override: Utility offset replacing the default rule
        trace: Keep a per-round record with prices

    Returns:
        AuctionOutcome with the final matching and round count

    Raises:
        AuctionDivergenceError: More rounds than price increments can account for
    """
    c_const = utility_offset(instance, c_override)
    state = AuctionState.initial(instance, delta, c_const)
    bound = round_bound(instance, delta, c_const)
    limit = divergence_limit(state)
    records = []

    while True:
        state.round += 1
        if state.round > limit:
            raise AuctionDivergenceError(
                f"Auction did not settle within {limit} rounds"
            )
        bids = collect_bids(state)
        if not bids:
            if trace:
                records.append(
                    RoundRecord(state.round, [], [], [], _price_snapshot(state)).to_dict()
                )
            break
        record = resolve_round(state, bids)
        if trace:
            record.prices = _price_snapshot(state)
            records.append(record.to_dict())

    matching = state.to_matching(instance.num_vehicles)
    logger.debug(
        f"Auction settled after {state.round} rounds (bound {bound}), "
        f"{len(matching.assigned)}/{instance.num_vehicles} assigned"
    )
    return AuctionOutcome(matching, state.round, bound, c_const, state, records)


def _price_snapshot(state: AuctionState) -> List[List[float]]:
    return [prices.tolist() for prices in state.slot_prices]


class AuctionSolver(BaseSolver):
    """Auction over the finite-blocklength rates of the instance."""

    name = "auction"

    def _solve(self, instance: ProblemInstance) -> SolverResult:
        auction = self.config.auction
        outcome = run_auction(
            instance, auction.delta, auction.c_override, trace=self.config.run.trace
        )
        if outcome.rounds > outcome.round_bound:
            self.logger.warning(
                f"Auction used {outcome.rounds} rounds, above its bound {outcome.round_bound}"
            )
        return SolverResult(
            matching=outcome.matching,
            rounds=outcome.rounds,
            round_bound=outcome.round_bound,
            available_clusters_per_vehicle=available_clusters_per_vehicle(
                instance, outcome.state, outcome.c_const
            ),
            trace=outcome.trace,
        )


class InfiniteBlocklengthAuctionSolver(AuctionSolver):
    """Auction on Shannon-capacity rates over the same gains."""

    name = "auction-infinite"

    def prepare(self, instance: ProblemInstance) -> ProblemInstance:
        return to_infinite_blocklength(instance)
