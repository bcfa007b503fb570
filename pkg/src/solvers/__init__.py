"""Mining-cluster selection solvers package."""

from src.solvers.auction_solver import AuctionSolver, InfiniteBlocklengthAuctionSolver
from src.solvers.base_solver import BaseSolver, SolverResult
from src.solvers.baseline_solver import InfiniteBlocklengthNearestSolver, NearestClusterSolver
from src.solvers.oracle_solver import BruteForceSolver

SOLVERS = {
    solver.name: solver
    for solver in (
        AuctionSolver,
        NearestClusterSolver,
        BruteForceSolver,
        InfiniteBlocklengthAuctionSolver,
        InfiniteBlocklengthNearestSolver,
    )
}


def get_solver(name: str, config) -> BaseSolver:
    """Get the solver registered under ``name``.

    Args:
        name: One of auction, nearest, bruteforce, auction-infinite,
            nearest-infinite
        config: ExperimentConfig passed to the solver

    Returns:
        Solver instance
    """
    try:
        return SOLVERS[name](config)
    except KeyError:
        raise ValueError(
            f"Unknown algorithm '{name}'. Available: {', '.join(SOLVERS)}"
        ) from None


__all__ = ["BaseSolver", "SolverResult", "SOLVERS", "get_solver"]
