"""Exception hierarchy for the mining-cluster selection simulator."""


class SimulationError(Exception):
    """Base class for every error raised by the simulator."""


class ValidationError(SimulationError, ValueError):
    """An input violates a documented range or type constraint."""


class DomainError(ValidationError):
    """A probability argument lies outside the open interval (0, 1)."""


class ConfigError(ValidationError):
    """The experiment configuration cannot be parsed or is invalid.

    Attributes:
        problems: Every constraint violation found, in discovery order
    """

    def __init__(self, message: str, problems=None):
        self.problems = list(problems or [])
        if self.problems:
            message = message + "\n" + "\n".join(f"  - {p}" for p in self.problems)
        super().__init__(message)


class InfeasibleBandwidthError(SimulationError):
    """More offloading vehicles than bandwidth units."""


class DegenerateObjectiveError(SimulationError):
    """An assigned vehicle sits on a zero-rate link, so its log-utility is -inf."""


class GraphConsistencyError(SimulationError):
    """A matching uses an edge that the expanded graph does not contain."""


class FeasibilityError(SimulationError):
    """A matching violates the single-cluster, slot or capacity constraints."""


class AuctionProtocolError(SimulationError):
    """A bid targets a cluster that does not exist or did not announce a price."""


class AuctionDivergenceError(SimulationError, RuntimeError):
    """The auction ran more rounds than its slot prices allow."""


class OracleSizeError(SimulationError):
    """The instance is too large for exhaustive search."""


class UndefinedMetricError(SimulationError):
    """A metric is undefined for the given input."""
