import numpy as np
import pytest

from passandswap import (
    ResourceError,
    UsageError,
    build_generator,
    solve_stationary,
    solve_unique,
    total_variation,
)
from conftest import open_transition_fn


def test_reachable_state_count(two_class_queue):
    gen = build_generator(open_transition_fn(two_class_queue, 2), ())
    assert gen.n_states == 7  # empty, 2 singles, 4 pairs


def test_rows_sum_to_zero(two_class_queue):
    gen = build_generator(open_transition_fn(two_class_queue, 4), ())
    sums = np.asarray(gen.matrix.sum(axis=1)).ravel()
    assert np.abs(sums).max() < 1e-12


def test_budget_exceeded(two_class_queue):
    with pytest.raises(ResourceError):
        build_generator(open_transition_fn(two_class_queue, 8), (), budget=10)


def test_two_state_birth_death():
    lam, mu_ = 0.7, 1.9

    def transitions(state):
        return [((1,), lam)] if state == () else [((), mu_)]

    gen = build_generator(transitions, ())
    dist = solve_unique(gen)
    assert dist[()] == pytest.approx(mu_ / (lam + mu_))
    assert dist[(1,)] == pytest.approx(lam / (lam + mu_))


def test_single_server_truncation_is_geometric():
    lam, mu_ = 0.5, 1.0
    n_max = 6

    def transitions(state):
        k = state[0]
        moves = []
        if k < n_max:
            moves.append(((k + 1,), lam))
        if k > 0:
            moves.append(((k - 1,), mu_))
        return moves

    gen = build_generator(transitions, (0,))
    dist = solve_unique(gen)
    rho = lam / mu_
    z = sum(rho**k for k in range(n_max + 1))
    for k in range(n_max + 1):
        assert dist[(k,)] == pytest.approx(rho**k / z)


def test_transient_states_are_excluded():
    # 0 -> 1 <-> 2 ; state 0 is transient
    def transitions(state):
        return {
            0: [(1, 1.0)],
            1: [(2, 2.0)],
            2: [(1, 3.0)],
        }[state]

    gen = build_generator(transitions, 0)
    sol = solve_stationary(gen)
    assert sol.n_transient_states == 1
    assert len(sol.solutions) == 1
    dist = sol.solutions[0].distribution
    assert dist[1] == pytest.approx(0.6)
    assert dist[2] == pytest.approx(0.4)
    with pytest.raises(UsageError):
        solve_unique(gen)


def test_uniformization_agrees_with_direct(two_class_queue):
    gen = build_generator(open_transition_fn(two_class_queue, 5), ())
    direct = solve_unique(gen)
    iterative = solve_unique(gen, direct_limit=0, residual_tol=1e-12)
    assert total_variation(direct, iterative) < 1e-10


def test_total_variation_golden():
    assert total_variation({0: 1.0}, {0: 1.0}) == 0.0
    assert total_variation({0: 1.0, 1: 0.0}, {0: 0.0, 1: 1.0}) == 1.0
    assert total_variation({0: 0.6, 1: 0.4}, {0: 0.5, 1: 0.5}) == pytest.approx(
        0.1
    )


def test_total_variation_mismatched_support():
    with pytest.raises(UsageError):
        total_variation({0: 1.0}, {1: 1.0})
