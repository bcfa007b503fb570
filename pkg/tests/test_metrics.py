import math

import numpy as np
import pytest

from src.errors import UndefinedMetricError, ValidationError
from src.matching_graph import Matching
from src.metrics import (
    METRIC_FIELDS,
    MetricsReport,
    aggregate,
    available_clusters_per_vehicle,
    evaluate,
    jain_fairness,
    mismanagement_ratio,
    summarize,
)
from src.scenario import ProblemInstance
from src.solvers.auction_solver import AuctionState, run_auction, utility_offset


def report(**overrides) -> MetricsReport:
    values = {
        "jain_index": 0.5,
        "mismanagement_ratio": 0.1,
        "sum_log_utility": 3.0,
        "mean_rate_bits_per_s": 1e5,
        "available_clusters_per_vehicle": None,
        "rounds": 0,
    }
    values.update(overrides)
    return MetricsReport(**values)


@pytest.mark.parametrize(
    "gains, expected",
    [([5, 5, 5, 5], 1.0), ([1, 0, 0, 0], 0.25), ([3, 1], 0.8)],
)
def test_jain_fairness(gains, expected):
    assert jain_fairness(gains) == pytest.approx(expected)


def test_jain_fairness_bounds():
    rng = np.random.default_rng(0)
    for n in range(1, 20):
        gains = rng.exponential(size=n)
        assert 1 / n - 1e-12 <= jain_fairness(gains) <= 1 + 1e-12


def test_jain_fairness_errors():
    with pytest.raises(UndefinedMetricError):
        jain_fairness([0, 0, 0])
    with pytest.raises(ValidationError):
        jain_fairness([])
    with pytest.raises(ValidationError):
        jain_fairness([1, -1])


def test_mismanagement_ratio():
    assert mismanagement_ratio(Matching.from_cluster_choices([0, 0], 1), 2) == 0.0
    assert mismanagement_ratio(Matching.empty(3, 1), 3) == 1.0
    choices = [0, 0, None, 1, 1, None, 2, 2]
    assert mismanagement_ratio(Matching.from_cluster_choices(choices, 3), 8) == 0.25
    with pytest.raises(ValidationError):
        mismanagement_ratio(Matching.empty(0, 1), 0)


@pytest.fixture
def three_vehicle_instance() -> ProblemInstance:
    """Utilities c + ln(omega) with c = 1 on two single-slot clusters."""
    rates = np.array(
        [
            [math.exp(1.0), math.exp(2.0)],
            [math.exp(0.5), 0.0],
            [math.exp(3.0), math.exp(0.2)],
        ]
    )
    return ProblemInstance.from_rate_matrix(rates)


def test_available_clusters_initial_state(three_vehicle_instance):
    c = utility_offset(three_vehicle_instance)
    state = AuctionState.initial(three_vehicle_instance, 0.01, c)
    # every feasible link is open at price 0
    assert available_clusters_per_vehicle(three_vehicle_instance, state, c) == pytest.approx(5 / 3)


def test_available_clusters_with_hand_set_prices(three_vehicle_instance):
    c = utility_offset(three_vehicle_instance)
    state = AuctionState.initial(three_vehicle_instance, 0.01, c)
    # utilities: [2.0, 3.0], [1.5, -inf], [4.0, 1.2]
    state.slot_prices[0][0] = 1.8
    state.slot_prices[1][0] = 2.5
    state.refresh_announcement(0)
    state.refresh_announcement(1)
    # vehicle 0: both, vehicle 1: none, vehicle 2: cluster 0 only
    assert available_clusters_per_vehicle(three_vehicle_instance, state, c) == pytest.approx(1.0)


def test_available_clusters_after_saturation(three_vehicle_instance):
    c = utility_offset(three_vehicle_instance)
    state = AuctionState.initial(three_vehicle_instance, 0.01, c)
    for prices in state.slot_prices:
        prices[:] = 100.0
    for j in range(2):
        state.refresh_announcement(j)
    assert available_clusters_per_vehicle(three_vehicle_instance, state, c) == 0.0


def test_evaluate_assigns_every_field(two_vehicle_instance):
    outcome = run_auction(two_vehicle_instance, 0.01)
    metrics = evaluate(two_vehicle_instance, outcome.matching, rounds=outcome.rounds)
    assert metrics.jain_index == pytest.approx(0.9)
    assert metrics.mismanagement_ratio == 0.0
    assert metrics.sum_log_utility == pytest.approx(math.log(2))
    assert metrics.mean_rate_bits_per_s == pytest.approx(3.0 / two_vehicle_instance.params.t)
    assert metrics.available_clusters_per_vehicle is None
    assert metrics.rounds == outcome.rounds


def test_evaluate_empty_matching_has_no_jain_index():
    instance = ProblemInstance.from_rate_matrix(np.zeros((2, 1)))
    metrics = evaluate(instance, Matching.empty(2, 1))
    assert metrics.jain_index is None
    assert metrics.mismanagement_ratio == 1.0
    assert metrics.sum_log_utility == 0.0
    assert metrics.mean_rate_bits_per_s == 0.0


def test_aggregate_single_report():
    summary = aggregate([report()])
    assert summary["jain_index"].mean == 0.5
    assert summary["jain_index"].std == 0.0
    assert summary["available_clusters_per_vehicle"].count == 0
    assert set(summary) == set(METRIC_FIELDS)


def test_aggregate_mean():
    summary = aggregate([report(jain_index=0.2), report(jain_index=0.4)])
    assert summary["jain_index"].mean == pytest.approx(0.3)
    assert summary["jain_index"].count == 2


def test_aggregate_is_order_independent():
    rng = np.random.default_rng(5)
    reports = [
        report(jain_index=float(x), rounds=int(r))
        for x, r in zip(rng.random(50), rng.integers(1, 999, 50))
    ]
    forward = aggregate(reports)
    for _ in range(5):
        shuffled = [reports[k] for k in rng.permutation(len(reports))]
        assert aggregate(shuffled) == forward


def test_aggregate_rejects_empty_list():
    with pytest.raises(ValidationError):
        aggregate([])


def test_summarize():
    assert summarize([]).to_dict() == {"mean": None, "std": None, "count": 0}
    assert summarize([1.0, 3.0]).std == pytest.approx(math.sqrt(2))
