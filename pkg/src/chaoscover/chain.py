"""The Markov chain on partition words and its hitting and covering times.

From state ``w`` the chain draws a symbol ``i`` with probability ``p_i`` and
moves to the partition word prefixing ``i w``.  States are indexed by their
position in the (lexicographically sorted) partition; symbols are 1-based in
the public API and 0-based as table columns.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from . import _kernels
from .errors import BudgetExceededError, CensoredSampleError, InvalidInputError, NumericError
from .parallel import map_seeds
from .partition import Partition, word_label
from .rng import trial_seeds

ROW_TOL = 1e-12
STATIONARY_TOL = 1e-10
RETURN_TOL = 1e-8
DEFAULT_SOLVE_LIMIT = 5_000
DEFAULT_STEP_CAP = 10**9
EXACT_COVER_LIMIT = 16


@dataclass(frozen=True, eq=False)
class Chain:
    """Transition table ``table[state, symbol] -> state`` with row weights."""

    table: np.ndarray
    weights: np.ndarray
    stationary: np.ndarray | None = None
    partition: Partition | None = None

    @property
    def state_count(self) -> int:
        return self.table.shape[0]

    def transitions(self, state: int):
        """``(symbol, target, probability)`` triples of one row."""
        return [
            (k + 1, int(self.table[state, k]), float(self.weights[state, k]))
            for k in range(self.table.shape[1])
        ]

    def label(self, state: int) -> str:
        if self.partition is None:
            return str(state)
        return word_label(self.partition.words[state].symbols)

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        n, m = self.table.shape
        rows = np.repeat(np.arange(n), m)
        return sp.csr_matrix((self.weights.ravel(), (rows, self.table.ravel())), shape=(n, n))

    @cached_property
    def cum_rows(self) -> np.ndarray:
        cum = np.cumsum(self.weights, axis=1)
        cum[:, -1] = 1.0
        return cum

    @cached_property
    def out_neighbors(self):
        return [sorted({int(t) for t, w in zip(self.table[i], self.weights[i]) if w > 0})
                for i in range(self.state_count)]


@dataclass(frozen=True)
class HittingProfile:
    target: int
    expected_hit: np.ndarray
    expected_return: float


@dataclass(frozen=True)
class BoundsReport:
    max_hit: float
    min_hit_offdiag: float
    matthews_upper: float
    matthews_upper_subset: tuple
    matthews_lower_subset: tuple
    harmonic: float


def harmonic(n: int) -> float:
    return math.fsum(1.0 / k for k in range(1, n + 1))


def build_chain(partition: Partition, probs=None) -> Chain:
    system = partition.system
    p = np.asarray(system.probs if probs is None else probs, dtype=np.float64)
    if p.shape != system.probs.shape or np.max(np.abs(p - system.probs)) > 1e-12:
        raise InvalidInputError("probability vector does not match the partition's system")
    n, m = len(partition), system.n_maps
    scales = [mp.scale for mp in system.maps]
    table = np.empty((n, m), dtype=np.int64)
    delta = partition.delta
    index = partition.index
    for pos, word in enumerate(partition.words):
        for i in range(1, m + 1):
            extended = (i,) + word.symbols
            ratio = 1.0
            for k, s in enumerate(extended):
                ratio *= scales[s - 1]
                if ratio <= delta:
                    table[pos, i - 1] = index[extended[: k + 1]]
                    break
    weights = np.tile(p, (n, 1))
    stationary = np.array([w.prob for w in partition.words])
    chain = Chain(table, weights, stationary, partition)
    _check_chain(chain)
    return chain


def _check_chain(chain: Chain):
    rows = np.abs(chain.weights.sum(axis=1) - 1.0)
    if rows.max() > ROW_TOL:
        raise NumericError(f"row sums deviate from 1 by {rows.max():.3e}")
    residual = verify_stationary(chain)
    if residual > STATIONARY_TOL:
        raise NumericError(f"stationary residual {residual:.3e} exceeds {STATIONARY_TOL}")
    if not is_irreducible(chain):
        raise NumericError("transition graph is not strongly connected")


def verify_stationary(chain: Chain) -> float:
    """Max-norm of ``pi A - pi``."""
    pi = chain.stationary
    flow = np.zeros(chain.state_count)
    np.add.at(flow, chain.table.ravel(), (pi[:, None] * chain.weights).ravel())
    return float(np.max(np.abs(flow - pi)))


def _reach_all(adjacency, n):
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    return bool(seen.all())


def is_irreducible(chain: Chain) -> bool:
    """One strongly connected component: everything reachable from state 0 both ways."""
    n = chain.state_count
    forward = chain.out_neighbors
    backward = [[] for _ in range(n)]
    for u, nbrs in enumerate(forward):
        for v in nbrs:
            backward[v].append(u)
    return _reach_all(forward, n) and _reach_all(backward, n)


def reachability_positive(chain: Chain, steps: int) -> bool:
    """Whether every entry of ``A**steps`` is positive (dense; small chains only)."""
    n = chain.state_count
    if n > 200:
        raise BudgetExceededError("matrix-power reachability is limited to 200 states")
    adj = (chain.matrix.toarray() > 0).astype(np.int64)
    power = np.eye(n, dtype=np.int64)
    for _ in range(steps):
        power = np.minimum(power @ adj, 1)
    return bool(power.all())


def min_transitions(chain: Chain, source: int, target: int) -> int:
    """Fewest steps from ``source`` to ``target`` (breadth-first search)."""
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        if u == target:
            return dist[u]
        for v in chain.out_neighbors[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return -1


def hitting_times(chain: Chain, target: int) -> HittingProfile:
    """Solve ``h_target = 0``, ``h_i = 1 + sum_k a_ik h_k`` for every other state."""
    n = chain.state_count
    if not 0 <= target < n:
        raise InvalidInputError(f"target {target} out of range")
    A = chain.matrix
    keep = np.flatnonzero(np.arange(n) != target)
    h = np.zeros(n)
    if keep.size:
        Q = A[keep][:, keep]
        system = (sp.identity(keep.size, format="csc") - Q).tocsc()
        h[keep] = np.atleast_1d(spsolve(system, np.ones(keep.size)))
        residual = np.max(np.abs(h[keep] - 1.0 - A[keep] @ h))
        if not np.all(np.isfinite(h)) or residual > 1e-10 * max(1.0, float(h.max())):
            raise NumericError(f"hitting-time solve for state {target} left residual {residual:.3e}")
    ret = 1.0 + float((A[target] @ h)[0])
    pi = chain.stationary
    if pi is not None and abs(ret * pi[target] - 1.0) > RETURN_TOL:
        raise NumericError(
            f"return time {ret!r} of state {target} differs from 1/pi = {1.0 / pi[target]!r}"
        )
    return HittingProfile(target, h, ret)


def hitting_matrix(chain: Chain, targets=None, limit: int = DEFAULT_SOLVE_LIMIT) -> np.ndarray:
    """``H[i, k] = E_i tau_{targets[k]}`` (all targets by default)."""
    if targets is None:
        if chain.state_count > limit:
            raise BudgetExceededError(
                f"{chain.state_count} states exceed the pairwise solve limit of {limit}; pass a subset"
            )
        targets = range(chain.state_count)
    targets = list(targets)
    H = np.empty((chain.state_count, len(targets)))
    for k, j in enumerate(targets):
        H[:, k] = hitting_times(chain, j).expected_hit
    return H


def _subset(chain: Chain, subset):
    if subset is None:
        return list(range(chain.state_count))
    states = sorted({int(s) for s in subset})
    if not states:
        raise InvalidInputError("subset must be non-empty")
    if states[0] < 0 or states[-1] >= chain.state_count:
        raise InvalidInputError("subset contains an unknown state")
    return states


def matthews_upper(chain: Chain, subset=None, limit: int = DEFAULT_SOLVE_LIMIT) -> float:
    """``max_{i,j in S} E_i tau_j * H_|S|``; bounds ``max_{i in S} E_i tau_cov^S``."""
    states = _subset(chain, subset)
    if subset is None and chain.state_count > limit:
        raise BudgetExceededError(f"{chain.state_count} states exceed the solve limit of {limit}")
    H = hitting_matrix(chain, states, limit=max(limit, chain.state_count))[states]
    return float(H.max()) * harmonic(len(states))


def matthews_lower(chain: Chain, subset, limit: int = DEFAULT_SOLVE_LIMIT) -> float:
    """``min_{i != j in B} E_i tau_j * H_{|B|-1}``; bounds ``E_i tau_cov^B`` for starts in B."""
    states = _subset(chain, subset)
    if len(states) < 2:
        raise InvalidInputError("the lower bound needs a subset of at least two states")
    H = hitting_matrix(chain, states, limit=max(limit, chain.state_count))[states]
    off = H[~np.eye(len(states), dtype=bool)]
    return float(off.min()) * harmonic(len(states) - 1)


def theta_bound(p_max: float, j: int, ell: int, ell_max: int) -> float:
    """Upper bound on ``P_i(tau_j < L)`` when at least ``j`` transitions are needed."""
    if not 0.0 < p_max < 1.0:
        raise InvalidInputError("p_max must lie in (0, 1)")
    if not 0 <= j <= ell <= ell_max:
        raise InvalidInputError("need 0 <= j <= ell <= ell_max")
    return p_max**j / (1.0 - p_max) + p_max**ell * (ell_max - ell)


def exact_cover_time(chain: Chain, start: int, subset=None) -> float:
    """Expected time to visit every state of ``subset`` (all states by default).

    Works on the product chain (visited set, current state).  A visited set
    only grows, so the sets are processed from the full set downwards and
    each one costs a single dense solve over the states it can sit in.
    """
    n = chain.state_count
    states = _subset(chain, subset)
    b = len(states)
    if b > EXACT_COVER_LIMIT or (n << b) > (1 << 22):
        raise BudgetExceededError(f"exact cover time is limited to {EXACT_COVER_LIMIT} states")
    if not 0 <= start < n:
        raise InvalidInputError(f"start {start} out of range")
    bit = np.zeros(n, dtype=np.int64)
    for k, s in enumerate(states):
        bit[s] = 1 << k
    A = chain.matrix.toarray()
    full = (1 << b) - 1
    E = np.full((full + 1, n), np.nan)
    E[full] = 0.0
    for mask in range(full - 1, -1, -1):
        live = [s for s in range(n) if bit[s] == 0 or mask & bit[s]]
        if not live:
            continue
        pos = {s: k for k, s in enumerate(live)}
        M = np.eye(len(live))
        rhs = np.ones(len(live))
        for a, s in enumerate(live):
            for k in np.flatnonzero(A[s]):
                if bit[k] == 0 or mask & bit[k]:
                    M[a, pos[k]] -= A[s, k]
                else:
                    rhs[a] += A[s, k] * E[mask | bit[k], k]
        sol = np.linalg.solve(M, rhs)
        if np.max(np.abs(M @ sol - rhs)) > 1e-9 * max(1.0, float(np.abs(sol).max())):
            raise NumericError("exact cover-time block solve is ill-conditioned")
        E[mask, live] = sol
    return float(E[int(bit[start]), start])


def _need_mask(chain, subset):
    need = np.zeros(chain.state_count, dtype=np.bool_)
    need[_subset(chain, subset)] = True
    return need


def sample_cover_time(chain: Chain, start: int, rng_seed: int, cap: int = DEFAULT_STEP_CAP, subset=None) -> int:
    steps = int(_kernels.chain_cover(np.uint64(rng_seed), chain.table, chain.cum_rows, int(start),
                                     _need_mask(chain, subset), int(cap)))
    if steps < 0:
        raise CensoredSampleError(f"cover-time sample censored at {cap} steps", steps=cap)
    return steps


def cover_time_samples(chain: Chain, start: int, trials: int, master_seed: int,
                       cap: int = DEFAULT_STEP_CAP, subset=None, threads=None) -> np.ndarray:
    """Cover times of ``trials`` independent walks; -1 marks a censored walk."""
    need = _need_mask(chain, subset)
    table, cum = chain.table, chain.cum_rows

    def batch(seeds):
        return _kernels.chain_cover_batch(seeds, table, cum, int(start), need, int(cap))

    return map_seeds(batch, trial_seeds(master_seed, trials), threads)


def mean_and_error(samples) -> tuple:
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        return math.nan, math.nan
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return float(x.mean()), se


def mc_cover_time(chain: Chain, start: int, trials: int, master_seed: int,
                  cap: int = DEFAULT_STEP_CAP, subset=None, threads=None) -> tuple:
    """Monte Carlo ``(mean, standard error)`` of the cover time; censoring is an error."""
    samples = cover_time_samples(chain, start, trials, master_seed, cap, subset, threads)
    if np.any(samples < 0):
        raise CensoredSampleError(f"{int(np.sum(samples < 0))} of {trials} walks censored at {cap}")
    return mean_and_error(samples)


def mc_hitting_time(chain: Chain, start: int, target: int, trials: int, master_seed: int,
                    cap: int = DEFAULT_STEP_CAP, threads=None) -> tuple:
    return mc_cover_time(chain, start, trials, master_seed, cap, subset=[target], threads=threads)


def mc_fast_hit_probability(chain: Chain, start: int, target: int, horizon: int,
                            trials: int, master_seed: int, threads=None) -> float:
    """Empirical ``P_start(tau_target < horizon)``."""
    if horizon <= 0:
        return 0.0
    samples = cover_time_samples(chain, start, trials, master_seed, horizon - 1,
                                 subset=[target], threads=threads)
    return float(np.mean(samples >= 0))


def fresh_appearance_samples(chain: Chain, state: int, trials: int, master_seed: int,
                             cap: int = DEFAULT_STEP_CAP, threads=None) -> np.ndarray:
    """Samples of the first time a state's word is spelled entirely by new symbols.

    The chain's state ``w`` is present at time ``t`` exactly when the newest
    ``|w|`` symbols, newest first, spell ``w``; ignoring the initial state
    removes any dependence on where the walk started.
    """
    if chain.partition is None:
        raise InvalidInputError("fresh appearance times need a partition-backed chain")
    word = np.array(chain.partition.words[state].symbols, dtype=np.int64) - 1
    cum = chain.cum_rows[0].copy()

    def batch(seeds):
        return _kernels.fresh_appearance_batch(seeds, cum, word, int(cap))

    samples = map_seeds(batch, trial_seeds(master_seed, trials), threads)
    if np.any(samples < 0):
        raise CensoredSampleError(f"fresh-appearance sample censored at {cap} steps")
    return samples
