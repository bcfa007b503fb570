"""Base mining-cluster selection solver."""

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from src.matching_graph import Matching
from src.scenario import ProblemInstance


@dataclass
class SolverResult:
    """What a solver hands back besides the matching itself.

    ``available_clusters_per_vehicle`` and ``round_bound`` are only set by
    the auction; the other solvers leave them as None and report 0 rounds.
    """

    matching: Matching
    rounds: int = 0
    round_bound: Optional[int] = None
    available_clusters_per_vehicle: Optional[float] = None
    objective: Optional[float] = None
    trace: List[Dict[str, Any]] = field(default_factory=list)
    enforce_capacity: bool = True
    instance: Optional[ProblemInstance] = None


class BaseSolver:
    """Base class for the selection solvers with common functionality."""

    name = "base"

    def __init__(self, config) -> None:
        """Initialize the solver.

        Args:
            config: ExperimentConfig the solver reads its options from
        """
        self.config = config
        self.logger = logging.getLogger(self.__class__.__name__)

    def prepare(self, instance: ProblemInstance) -> ProblemInstance:
        """Return the instance this solver works on.

        Should be overridden by variants that change the channel model.
        """
        return instance

    def _solve(self, instance: ProblemInstance) -> SolverResult:
        """Compute the matching. Must be overridden by subclasses."""
        raise NotImplementedError

    def solve(self, instance: ProblemInstance) -> SolverResult:
        """Prepare the instance, solve it and check the result is feasible.

        Args:
            instance: Problem instance built by the scenario module

        Returns:
            SolverResult whose matching satisfies the capacity constraints
        """
        instance = self.prepare(instance)
        result = self._solve(instance)
        result.instance = instance
        result.matching.validate(instance, enforce_capacity=result.enforce_capacity)
        self.logger.debug(
            f"{self.name}: {len(result.matching.assigned)}/{instance.num_vehicles} "
            f"vehicles assigned in {result.rounds} rounds"
        )
        return result


def to_infinite_blocklength(instance: ProblemInstance) -> ProblemInstance:
    """Same topology and gains, rates from Shannon capacity."""
    params = dataclasses.replace(instance.params, blocklength_mode="infinite")
    return instance.with_params(params)
