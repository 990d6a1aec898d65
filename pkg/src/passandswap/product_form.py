"""Product-form stationary analysis of the open queue.

The unnormalized weight of a state multiplies the per-customer arrival rates
and divides by the overall service rate of every prefix.  Renormalizing these
weights over all states of length at most ``capacity`` gives the exact
stationary distribution of the arrival-blocked truncation of the queue, and
the same weights satisfy the partial balance identities checked by
:func:`verify_partial_balance`.  Weights accumulate in log space to stay
finite for deep truncations.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .dynamics import apply_completion, predecessors
from .errors import ResourceError, UsageError
from .model import (
    Macrostate,
    PandsQueue,
    RateFunction,
    State,
    macrostate,
)

DEFAULT_STATE_BUDGET = 1_000_000


@dataclass(frozen=True)
class BalanceWeight:
    """Product of reciprocal overall rates over the prefixes of a state."""

    value: float
    log_value: float


def balance(rate_fn: RateFunction, state: Sequence[int]) -> BalanceWeight:
    """Balance weight of ``state``; the empty state has weight 1."""
    log_value = 0.0
    counts = [0] * rate_fn.n_classes
    for cls in state:
        counts[cls] += 1
        r = rate_fn.rate(tuple(counts))
        if r <= 0.0:
            raise UsageError(
                f"overall rate is not positive on prefix {tuple(counts)}"
            )
        log_value -= math.log(r)
    return BalanceWeight(math.exp(log_value), log_value)


def log_state_weight(queue: PandsQueue, state: Sequence[int]) -> float:
    """Log of the unnormalized product-form measure of ``state``."""
    w = balance(queue.rate_fn, state).log_value
    for cls in state:
        w += math.log(queue.arrival_rates[cls])
    return w


def state_weight(queue: PandsQueue, state: Sequence[int]) -> float:
    return math.exp(log_state_weight(queue, state))


def _logsumexp(values: Sequence[float]) -> float:
    m = max(values)
    return m + math.log(sum(math.exp(v - m) for v in values))


@dataclass(frozen=True)
class TruncatedDistribution:
    """Exact stationary distribution of the arrival-blocked truncation."""

    n_classes: int
    capacity: int
    states: tuple[State, ...]
    log_weights: Mapping[State, float]
    log_normalizer: float

    @property
    def weights(self) -> dict[State, float]:
        """Unnormalized weights on the linear scale."""
        return {s: math.exp(w) for s, w in self.log_weights.items()}

    @property
    def normalizer(self) -> float:
        return math.exp(self.log_normalizer)

    def probability(self, state: State) -> float:
        try:
            return math.exp(self.log_weights[state] - self.log_normalizer)
        except KeyError:
            raise UsageError(
                f"state {state} outside the truncated space"
            ) from None

    def probabilities(self) -> dict[State, float]:
        z = self.log_normalizer
        return {s: math.exp(w - z) for s, w in self.log_weights.items()}

    def mean_counts(self) -> tuple[float, ...]:
        """Expected number of customers of each class."""
        totals = [0.0] * self.n_classes
        for s, p in self.probabilities().items():
            for cls in s:
                totals[cls] += p
        return tuple(totals)


def stationary_truncated(
    queue: PandsQueue, capacity: int, budget: int = DEFAULT_STATE_BUDGET
) -> TruncatedDistribution:
    """Product-form stationary distribution truncated at ``capacity``
    customers.

    The result never consults the swapping graph: the measure is the same
    for every graph over a fixed rate function and arrival rates.
    """
    if capacity < 0:
        raise UsageError("capacity must be non-negative")
    n = queue.n_classes
    total_states = (
        capacity + 1 if n == 1 else (n ** (capacity + 1) - 1) // (n - 1)
    )
    if total_states > budget:
        raise ResourceError(
            f"truncation at {capacity} needs {total_states} states, "
            f"budget is {budget}"
        )
    log_lam = [math.log(l) for l in queue.arrival_rates]
    rate = queue.rate_fn.rate
    counts = [0] * n
    log_weights: dict[State, float] = {}
    order: list[State] = []

    def extend(state: State, lw: float) -> None:
        order.append(state)
        log_weights[state] = lw
        if len(state) == capacity:
            return
        for i in range(n):
            counts[i] += 1
            r = rate(tuple(counts))
            if r <= 0.0:
                counts[i] -= 1
                raise UsageError(
                    f"overall rate is not positive on macrostate {tuple(counts)}"
                )
            extend(state + (i,), lw + log_lam[i] - math.log(r))
            counts[i] -= 1

    extend((), 0.0)
    log_z = _logsumexp(list(log_weights.values()))
    return TruncatedDistribution(n, capacity, tuple(order), log_weights, log_z)


@dataclass(frozen=True)
class PartialBalanceReport:
    """Residuals of the two partial balance identities on the product-form
    measure, over all states up to a length bound."""

    max_residual: float
    max_departure_residual: float
    max_arrival_residual: float
    worst_witness: tuple
    states_checked: int

    @property
    def ok(self) -> bool:
        return self.max_residual < 1e-10


def _relative_residual(a: float, b: float) -> float:
    scale = max(abs(a), abs(b), 1e-300)
    return abs(a - b) / scale


def verify_partial_balance(
    queue: PandsQueue,
    max_len: int,
    weight_fn: Callable[[State], float] | None = None,
) -> PartialBalanceReport:
    """Check, for every state ``c`` of length at most ``max_len``:

    * departure flow out of ``c`` equals arrival flow in:
      ``w(c) mu(c) == w(c[:-1]) lambda(c[-1])``;
    * for each class ``i``, arrival flow out of ``c`` equals the departure
      flow in over all predecessors of ``(c, i)``.

    Residuals are relative.  ``weight_fn`` overrides the product-form weight
    (useful to confirm that corrupted weights are flagged).
    """
    if max_len < 1:
        raise UsageError("max_len must be at least 1")
    w = weight_fn or (lambda s: state_weight(queue, s))
    n_cls = queue.n_classes
    rate_fn = queue.rate_fn
    max_dep = 0.0
    max_arr = 0.0
    worst: tuple = ()
    checked = 0
    for length in range(max_len + 1):
        for state in itertools.product(range(n_cls), repeat=length):
            checked += 1
            wc = w(state)
            if state:
                lhs = wc * rate_fn.state_rate(state)
                rhs = w(state[:-1]) * queue.arrival_rates[state[-1]]
                res = _relative_residual(lhs, rhs)
                if res > max_dep:
                    max_dep, worst = res, ("departure", state)
            for i in range(n_cls):
                lhs = wc * queue.arrival_rates[i]
                rhs = 0.0
                for prev, pos in predecessors(queue.swapping, state, i):
                    rhs += w(prev) * rate_fn.increments(prev)[pos]
                res = _relative_residual(lhs, rhs)
                if res > max_arr:
                    max_arr, worst = res, ("arrival", state, i)
    return PartialBalanceReport(
        max(max_dep, max_arr), max_dep, max_arr, worst, checked
    )


@dataclass(frozen=True)
class StabilityReport:
    """Strict subset-wise comparison of arrival rates against saturated
    service rates; equality on any subset counts as unstable."""

    stable: bool
    violations: tuple[tuple[tuple[int, ...], float, float], ...]
    saturation: Mapping[frozenset[int], float]


def stability_check(queue: PandsQueue) -> StabilityReport:
    """Decide stability from the saturated rates of every non-empty class
    subset.

    Multi-server rate functions provide saturation rates in closed form;
    table-backed ones must declare them, otherwise a
    :class:`~passandswap.errors.CapabilityError` propagates.
    """
    n = queue.n_classes
    if n > 20:
        raise ResourceError(
            f"stability check enumerates 2^{n} - 1 subsets; refusing beyond 20 classes"
        )
    violations = []
    saturation: dict[frozenset[int], float] = {}
    for r in range(1, n + 1):
        for subset in itertools.combinations(range(n), r):
            sat = queue.rate_fn.saturation_rate(subset)
            saturation[frozenset(subset)] = sat
            arrivals = sum(queue.arrival_rates[i] for i in subset)
            if not arrivals < sat:
                violations.append((subset, arrivals, sat))
    return StabilityReport(not violations, tuple(violations), saturation)


def flow_rates(
    queue: PandsQueue, state: State
) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Per-class departure and service rate vectors in ``state``.

    The service vector credits each position's rate to the class standing
    there; the departure vector credits it to the class that leaves when
    that position completes.  Both sum to the overall rate.
    """
    n = queue.n_classes
    phi_d = [0.0] * n
    phi_s = [0.0] * n
    for pos, inc in enumerate(queue.rate_fn.increments(state)):
        if inc <= 0.0:
            continue
        phi_s[state[pos]] += inc
        oc = apply_completion(queue.swapping, state, pos)
        phi_d[oc.departing_class] += inc
    return tuple(phi_d), tuple(phi_s)


def macrostate_flow_identity(
    queue: PandsQueue, total: int
) -> tuple[float, Macrostate | None]:
    """Largest relative gap between departure-weighted and service-weighted
    probability flow, per macrostate with the given total and per class.

    Uses the unnormalized product-form measure; returns the worst gap and
    the macrostate attaining it.
    """
    n = queue.n_classes
    by_macro: dict[Macrostate, tuple[list[float], list[float]]] = {}
    for state in itertools.product(range(n), repeat=total):
        wgt = state_weight(queue, state)
        phi_d, phi_s = flow_rates(queue, state)
        key = macrostate(state, n)
        acc = by_macro.setdefault(key, ([0.0] * n, [0.0] * n))
        for i in range(n):
            acc[0][i] += wgt * phi_d[i]
            acc[1][i] += wgt * phi_s[i]
    worst = 0.0
    arg: Macrostate | None = None
    for key, (dep, srv) in by_macro.items():
        for i in range(n):
            res = _relative_residual(dep[i], srv[i])
            if res > worst:
                worst, arg = res, key
    return worst, arg
