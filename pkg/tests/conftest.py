import pytest

from passandswap import (
    MultiServerRates,
    PandsQueue,
    RateFunction,
    SwappingGraph,
)
from passandswap.closed import closed_transitions, tandem_transitions
from passandswap.dynamics import open_transitions


class UnitIncrementRates(RateFunction):
    """Every customer is served at rate 1, regardless of position."""

    def __init__(self, n_classes: int):
        self.n_classes = n_classes

    def rate(self, counts):
        return float(sum(counts))

    def saturation_rate(self, classes):
        return float("inf")


@pytest.fixture
def two_class_rates():
    # two classes, three unit-rate servers; class 1 on servers {1,3},
    # class 2 on servers {2,3}
    return MultiServerRates.build([1.0, 1.0, 1.0], [{0, 2}, {1, 2}])


@pytest.fixture
def two_class_queue(two_class_rates):
    return PandsQueue((0.8, 0.8), two_class_rates, SwappingGraph.edgeless(2))


@pytest.fixture
def three_class_rates():
    # three classes, two unit-rate servers; class 3 is served by both
    return MultiServerRates.build([1.0, 1.0], [{0}, {1}, {0, 1}])


@pytest.fixture
def path_graph():
    # swapping edges 1-2 and 2-3 (class 2 swaps with both neighbors)
    return SwappingGraph.from_pairs(3, [(0, 1), (1, 2)])


@pytest.fixture
def three_class_queue(three_class_rates, path_graph):
    return PandsQueue((0.8, 0.8, 0.8), three_class_rates, path_graph)


@pytest.fixture
def six_class_graph():
    # the six-class closed-model toy graph (1-based edges):
    # 6-3, 3-1, 1-4, 4-2, 2-5, 5-6, 6-4
    return SwappingGraph.from_pairs(
        6, [(5, 2), (2, 0), (0, 3), (3, 1), (1, 4), (4, 5), (5, 3)]
    )


@pytest.fixture
def unit_rates_six():
    return UnitIncrementRates(6)


def open_transition_fn(queue, capacity):
    return lambda s: [
        (t.next_state, t.rate) for t in open_transitions(queue, s, capacity)
    ]


def closed_transition_fn(cq):
    return lambda s: [
        (t.next_state, t.rate) for t in closed_transitions(cq, s)
    ]


def tandem_transition_fn(net):
    return lambda s: [
        (t.next_state, t.rate) for t in tandem_transitions(net, s)
    ]
