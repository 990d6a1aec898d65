"""Independent ground truth: explicit generator matrices and their
stationary solutions.

Nothing in this module consults balance weights or any other closed-form
expression; it only replays the transition mechanism to build the generator
of the continuous-time Markov chain and solves it numerically, so agreement
with the analytic distributions is a genuine cross-check.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Any, Callable, Hashable, Iterable, Mapping

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .errors import ConvergenceError, ResourceError, UsageError

TransitionFn = Callable[[Any], Iterable[tuple[Any, float]]]

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class GeneratorMatrix:
    """Generator of a finite chain over an explicitly enumerated state set.

    ``matrix`` holds off-diagonal rates with diagonals set to minus the row
    sums; state indices follow breadth-first discovery order, which is
    deterministic for a fixed transition function and initial state.
    """

    states: tuple[Hashable, ...]
    index: Mapping[Hashable, int]
    matrix: sp.csr_matrix

    @property
    def n_states(self) -> int:
        return len(self.states)


def build_generator(
    transitions: TransitionFn,
    initial: Hashable,
    budget: int = 200_000,
) -> GeneratorMatrix:
    """Breadth-first closure of the reachable state space from ``initial``.

    Parallel transitions between the same pair of states aggregate by rate
    summation; self-transitions cancel in the generator and are dropped.
    """
    index: dict[Hashable, int] = {initial: 0}
    order: list[Hashable] = [initial]
    frontier: deque[Hashable] = deque([initial])
    entries: dict[tuple[int, int], float] = {}
    while frontier:
        state = frontier.popleft()
        u = index[state]
        for target, rate in transitions(state):
            if rate < 0.0:
                raise UsageError(f"negative rate {rate} from state {state!r}")
            if rate == 0.0:
                continue
            if target not in index:
                if len(index) >= budget:
                    raise ResourceError(
                        f"reachable state count exceeded budget {budget} "
                        f"(frontier size {len(frontier)})"
                    )
                index[target] = len(order)
                order.append(target)
                frontier.append(target)
            v = index[target]
            if u != v:
                entries[(u, v)] = entries.get((u, v), 0.0) + rate
    n = len(order)
    rows = [u for u, _ in entries]
    cols = [v for _, v in entries]
    vals = [entries[(u, v)] for u, v in zip(rows, cols)]
    diag_idx = list(range(n))
    row_sums = [0.0] * n
    for u, val in zip(rows, vals):
        row_sums[u] += val
    rows += diag_idx
    cols += diag_idx
    vals += [-s for s in row_sums]
    matrix = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    check = np.abs(np.asarray(matrix.sum(axis=1)).ravel())
    if check.size and check.max() > ROW_SUM_TOL:
        raise ConvergenceError("generator rows do not sum to zero")
    return GeneratorMatrix(tuple(order), index, matrix)


@dataclass(frozen=True)
class ClassSolution:
    """Stationary distribution of one closed communicating class."""

    states: tuple[Hashable, ...]
    distribution: Mapping[Hashable, float]
    residual: float
    method: str


@dataclass(frozen=True)
class StationarySolution:
    solutions: tuple[ClassSolution, ...]
    n_components: int
    n_transient_states: int


def _solve_direct(q_sub: sp.csr_matrix) -> np.ndarray:
    n = q_sub.shape[0]
    if n == 1:
        return np.array([1.0])
    a = q_sub.transpose().tolil()
    a[n - 1, :] = 1.0
    b = np.zeros(n)
    b[n - 1] = 1.0
    pi = spla.spsolve(a.tocsc(), b)
    return np.asarray(pi).ravel()


def _solve_uniformized(
    q_sub: sp.csr_matrix,
    damping: float,
    margin: float,
    max_iterations: int,
    residual_tol: float,
) -> tuple[np.ndarray, list[float]]:
    n = q_sub.shape[0]
    out_rates = -q_sub.diagonal()
    lam = margin * float(out_rates.max()) if n else 1.0
    if lam <= 0.0:
        return np.full(n, 1.0 / n), [0.0]
    p = sp.eye(n, format="csr") + q_sub / lam
    pi = np.full(n, 1.0 / n)
    history: list[float] = []
    for it in range(max_iterations):
        pi = (1.0 - damping) * pi + damping * (pi @ p)
        pi = np.maximum(pi, 0.0)
        pi /= pi.sum()
        if it % 50 == 0 or it == max_iterations - 1:
            residual = float(np.abs(pi @ q_sub).max())
            history.append(residual)
            if residual < residual_tol:
                return pi, history
    raise ConvergenceError(
        f"uniformized power iteration failed to converge; "
        f"residual history tail {history[-5:]}"
    )


def solve_stationary(
    g: GeneratorMatrix,
    direct_limit: int = 50_000,
    damping: float = 0.99,
    uniformization_margin: float = 1.05,
    max_iterations: int = 1_000_000,
    residual_tol: float = 1e-11,
) -> StationarySolution:
    """Stationary distribution of every closed communicating class.

    Classes small enough solve directly through a sparse linear system;
    larger ones fall back to damped power iteration on the uniformized
    chain.  Either way the residual ``max |pi Q|`` must come in below
    ``residual_tol``.
    """
    n = g.n_states
    adjacency = sp.csr_matrix(
        (np.ones(g.matrix.nnz), g.matrix.indices, g.matrix.indptr), shape=(n, n)
    )
    n_comp, labels = connected_components(
        adjacency, directed=True, connection="strong"
    )
    closed = np.ones(n_comp, dtype=bool)
    coo = g.matrix.tocoo()
    for u, v, val in zip(coo.row, coo.col, coo.data):
        if u != v and val > 0.0 and labels[u] != labels[v]:
            closed[labels[u]] = False
    solutions: list[ClassSolution] = []
    transient = 0
    seen_order: list[int] = []
    for lab in labels:
        if lab not in seen_order:
            seen_order.append(lab)
    for lab in seen_order:
        members = np.flatnonzero(labels == lab)
        if not closed[lab]:
            transient += len(members)
            continue
        q_sub = g.matrix[members][:, members].tocsr()
        if len(members) <= direct_limit:
            pi = _solve_direct(q_sub)
            method = "direct"
        else:
            pi, _ = _solve_uniformized(
                q_sub, damping, uniformization_margin, max_iterations,
                residual_tol,
            )
            method = "uniformization"
        residual = float(np.abs(pi @ q_sub).max()) if len(members) > 1 else 0.0
        if residual > residual_tol or not np.isfinite(pi).all():
            raise ConvergenceError(
                f"stationary solve residual {residual} above {residual_tol}"
            )
        states = tuple(g.states[i] for i in members)
        dist = {s: float(p) for s, p in zip(states, pi)}
        solutions.append(ClassSolution(states, dist, residual, method))
    return StationarySolution(tuple(solutions), n_comp, transient)


def solve_unique(g: GeneratorMatrix, **kwargs) -> dict[Hashable, float]:
    """Stationary distribution of a chain with exactly one closed class
    covering every reachable state."""
    sol = solve_stationary(g, **kwargs)
    if len(sol.solutions) != 1 or sol.n_transient_states:
        raise UsageError(
            f"chain is not irreducible: {len(sol.solutions)} closed classes, "
            f"{sol.n_transient_states} transient states"
        )
    return dict(sol.solutions[0].distribution)


def total_variation(
    p: Mapping[Hashable, float], q: Mapping[Hashable, float]
) -> float:
    """Half the L1 distance between two distributions on the same support."""
    if set(p) != set(q):
        raise UsageError("distributions have mismatched supports")
    return 0.5 * sum(abs(p[k] - q[k]) for k in p)
