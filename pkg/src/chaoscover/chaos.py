"""Random iteration on R^d and waiting times for delta-density.

Density is tested against a finite reference net: the orbit counts as
``delta``-dense once every net point lies within ``delta`` of some orbit
point.  With net mesh ``rho * diam`` at most ``delta / 4`` the measured time
sits between the true waiting times at ``delta + rho * diam`` and ``delta``.
The starting point is part of the orbit (time 0).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import NamedTuple

import numpy as np

from . import _kernels
from .chain import Chain, build_chain, mean_and_error, sample_cover_time
from .errors import BudgetExceededError, CensoredSampleError, InvalidInputError
from .ifs import IfsSystem, fixed_point
from .parallel import map_seeds
from .partition import ReferenceNet, build_net, build_partition, default_diameter
from .rng import SplitMix64, cumulative, draw_symbol, trial_seeds

DEFAULT_CAP = 10**8
NET_SLACK = 0.25
MAX_GRID_CELLS = 50_000_000


class Trajectory:
    """One chaos-game orbit driven by a SplitMix64 stream."""

    def __init__(self, system: IfsSystem, start=None, seed: int = 0):
        self.system = system
        if start is None:
            start = fixed_point(system.maps[0])
        self.current_point = np.array(start, dtype=np.float64).reshape(-1)
        self.step_count = 0
        self.rng = SplitMix64(seed)
        self._cum = cumulative(system.probs)

    def apply_symbol(self, symbol: int) -> np.ndarray:
        self.current_point = self.system.maps[symbol - 1](self.current_point)
        self.step_count += 1
        return self.current_point

    def step(self):
        symbol = draw_symbol(self.rng.uniform(), self._cum) + 1
        return symbol, self.apply_symbol(symbol)


def run_step(trajectory: Trajectory):
    """Draw a symbol, move the point; returns ``(symbol, new_point)``."""
    return trajectory.step()


class CoverTracker:
    """Net points flagged once some orbit point comes within ``radius``.

    Net points are bucketed on a uniform grid of cell side ``radius`` over
    their bounding box, so a query inspects the 3^d cells around the query
    point.  Cells whose points are all flagged are skipped outright.
    """

    def __init__(self, net_points, radius: float):
        pts = np.ascontiguousarray(np.asarray(net_points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise InvalidInputError("cover tracker needs a non-empty (n, d) point array")
        if radius <= 0:
            raise InvalidInputError("radius must be positive")
        self.radius = float(radius)
        d = pts.shape[1]
        # widened a hair so that points within radius never sit two cells apart
        h = self.radius * (1.0 + 1e-9)
        lo = pts.min(axis=0)
        dims = np.floor((pts.max(axis=0) - lo) / h).astype(np.int64) + 1
        n_cells = int(np.prod(dims))
        if n_cells > MAX_GRID_CELLS:
            raise BudgetExceededError(f"grid of {n_cells} cells exceeds {MAX_GRID_CELLS}")
        strides = np.ones(d, dtype=np.int64)
        for k in range(d - 2, -1, -1):
            strides[k] = strides[k + 1] * dims[k + 1]
        coords = np.minimum(np.floor((pts - lo) / h).astype(np.int64), dims - 1)
        cells = coords @ strides
        self.points = pts
        self.order = np.argsort(cells, kind="stable").astype(np.int64)
        counts = np.bincount(cells, minlength=n_cells).astype(np.int64)
        self.cell_start = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.cell_count = counts
        self.origin = lo
        self.inv_h = 1.0 / h
        self.dims = dims
        self.strides = strides
        self.offsets = np.array(list(product((-1, 0, 1), repeat=d)), dtype=np.int64)
        self.r2 = self.radius * self.radius
        self.reset()

    def reset(self):
        self.covered_flags = np.zeros(self.points.shape[0], dtype=np.bool_)
        self._cell_uncov = self.cell_count.copy()
        self.uncovered_count = self.points.shape[0]
        self._scratch = np.empty(self.points.shape[1], dtype=np.int64)

    def mark(self, point) -> int:
        p = np.ascontiguousarray(point, dtype=np.float64)
        newly = _kernels.mark_point(
            p, self.points, self.order, self.cell_start, self._cell_uncov, self.covered_flags,
            self.origin, self.inv_h, self.dims, self.strides, self.offsets, self.r2, self._scratch,
        )
        self.uncovered_count -= newly
        return newly

    def kernel_args(self):
        return (self.points, self.order, self.cell_start, self.cell_count, self.origin,
                self.inv_h, self.dims, self.strides, self.offsets, self.r2)


@dataclass(frozen=True)
class WaitingSample:
    steps: int
    censored: bool
    delta: float
    seed: int


class MeanEstimate(NamedTuple):
    mean: float
    std_error: float
    censored_fraction: float


def _map_args(system: IfsSystem):
    return (np.ascontiguousarray(system.linear_parts()),
            np.ascontiguousarray(system.translations()),
            cumulative(system.probs))


def _start_point(system, v0):
    if v0 is None:
        return fixed_point(system.maps[0])
    v0 = np.asarray(v0, dtype=np.float64).reshape(-1)
    if v0.shape[0] != system.dimension_d:
        raise InvalidInputError(f"starting point must have {system.dimension_d} coordinates")
    return v0


def _check_net(system, delta, net):
    if not 0.0 < delta < system.r_min:
        raise InvalidInputError(f"delta must lie in (0, r_min={system.r_min})")
    if net.density_radius > NET_SLACK * delta * (1 + 1e-12):
        raise InvalidInputError(
            f"net mesh {net.density_radius:.3g} is coarser than delta/4 = {delta / 4:.3g}"
        )


def default_net(system: IfsSystem, delta: float, net_ratio: float = NET_SLACK) -> ReferenceNet:
    """Net whose mesh ``rho * diam`` equals ``net_ratio * delta``."""
    if not 0.0 < net_ratio <= NET_SLACK:
        raise InvalidInputError("net_ratio must lie in (0, 1/4]")
    diam = default_diameter(system)
    return build_net(system, net_ratio * delta / diam, diameter=diam)


def _wait_samples(system, v0, tracker, seeds, cap, threads):
    lin, trans, cum = _map_args(system)
    args = tracker.kernel_args()

    def batch(chunk):
        return _kernels.geometric_wait_batch(chunk, v0, lin, trans, cum, *args, int(cap))

    return map_seeds(batch, seeds, threads)


def waiting_time_sample(system: IfsSystem, v0, delta: float, net: ReferenceNet,
                        seed: int, cap: int = DEFAULT_CAP) -> WaitingSample:
    _check_net(system, delta, net)
    v0 = _start_point(system, v0)
    tracker = CoverTracker(net.points, delta)
    steps = int(_wait_samples(system, v0, tracker, np.array([seed], dtype=np.uint64), cap, 1)[0])
    if steps < 0:
        return WaitingSample(int(cap), True, float(delta), int(seed))
    return WaitingSample(steps, False, float(delta), int(seed))


def waiting_time_samples(system: IfsSystem, v0, delta: float, net: ReferenceNet, trials: int,
                         master_seed: int, cap: int = DEFAULT_CAP, threads=None) -> np.ndarray:
    """Raw per-trial waiting times (-1 for censored) with seeds derived from ``master_seed``."""
    if trials < 1:
        raise InvalidInputError("trials must be at least 1")
    _check_net(system, delta, net)
    v0 = _start_point(system, v0)
    tracker = CoverTracker(net.points, delta)
    return _wait_samples(system, v0, tracker, trial_seeds(master_seed, trials), cap, threads)


def summarize(samples) -> MeanEstimate:
    samples = np.asarray(samples)
    ok = samples[samples >= 0]
    mean, se = mean_and_error(ok)
    return MeanEstimate(mean, se, float(np.mean(samples < 0)))


def estimate_mean_waiting(system: IfsSystem, v0, delta: float, net: ReferenceNet, trials: int,
                          master_seed: int, cap: int = DEFAULT_CAP, threads=None) -> MeanEstimate:
    """Mean and standard error over uncensored trials, plus the censored fraction."""
    return summarize(waiting_time_samples(system, v0, delta, net, trials, master_seed, cap, threads))


def symbolic_waiting_time_sample(chain: Chain, v0_word, seed: int, cap: int = DEFAULT_CAP) -> WaitingSample:
    """Chain cover time from ``v0_word``, driven by the same stream as the geometric sampler."""
    start = chain.partition.position(v0_word)
    try:
        steps = sample_cover_time(chain, start, seed, cap)
    except CensoredSampleError:
        return WaitingSample(int(cap), True, chain.partition.delta, int(seed))
    return WaitingSample(steps, False, chain.partition.delta, int(seed))


def fixed_point_word(partition, map_index: int):
    """Partition word made of ``map_index`` alone; its cylinder holds that map's fixed point."""
    for w in partition.words:
        if all(s == map_index for s in w.symbols):
            return w
    raise InvalidInputError(f"no constant word of symbol {map_index}")


def orbit_points(system: IfsSystem, v0, seed: int, steps: int) -> np.ndarray:
    lin, trans, cum = _map_args(system)
    return _kernels.orbit(np.uint64(seed), _start_point(system, v0), lin, trans, cum, int(steps))


@dataclass(frozen=True)
class SandwichRow:
    seed: int
    lower: int
    symbolic: int
    upper: int

    @property
    def holds(self) -> bool:
        return self.lower <= self.symbolic <= self.upper


class SandwichSetup(NamedTuple):
    delta: float
    lower_radius: float
    upper_radius: float
    kappa: float
    diameter: float


def paired_sandwich(system: IfsSystem, delta: float, seeds, net_ratio: float = NET_SLACK,
                    cap: int = DEFAULT_CAP):
    """Geometric and symbolic waiting times driven by identical symbol streams.

    The walk starts at the first map's fixed point, inside the cylinder of
    the constant word ``11...1``.  ``lower`` is the orbit's time to come
    within ``2 * diam * delta`` of a fine net of attractor points; ``upper``
    its time to come within ``kappa * delta`` of every ``S_w x``, ``w`` in the
    partition, with ``(x, eps)`` the OSC witness ball and
    ``kappa = r_min * eps``.  Both nets lie in the attractor, so
    ``lower <= W_{2 diam delta}`` and ``upper <= W_{kappa delta}``, while the
    disjoint-ball argument gives ``symbolic <= upper`` stream by stream.
    """
    if system.osc_witness is None:
        raise InvalidInputError("the sandwich check needs an OSC witness ball")
    center, eps = system.osc_witness
    kappa = system.r_min * eps
    diam = default_diameter(system)
    lower_radius = 2.0 * diam * delta
    upper_radius = kappa * delta

    part = build_partition(system, delta)
    chain = build_chain(part)
    start = part.position(fixed_point_word(part, 1))
    v0 = fixed_point(system.maps[0])

    fine = build_net(system, net_ratio * lower_radius / diam, diameter=diam)
    witness = build_net(system, delta, base=center, diameter=diam)
    lower_tracker = CoverTracker(fine.points, lower_radius)
    upper_tracker = CoverTracker(witness.points, upper_radius)

    seeds = np.asarray(list(seeds), dtype=np.uint64)
    lows = _wait_samples(system, v0, lower_tracker, seeds, cap, None)
    highs = _wait_samples(system, v0, upper_tracker, seeds, cap, None)
    rows = []
    for k, seed in enumerate(seeds):
        sym = sample_cover_time(chain, start, int(seed), cap)
        if lows[k] < 0 or highs[k] < 0:
            raise CensoredSampleError(f"sandwich stream {int(seed)} censored at {cap}")
        rows.append(SandwichRow(int(seed), int(lows[k]), sym, int(highs[k])))
    setup = SandwichSetup(delta, lower_radius, upper_radius, kappa, diam)
    return setup, rows


def uniform_constant(kappa: float, diameter: float) -> float:
    """The comparison constant ``min(1 / (2 diam), kappa)``."""
    return min(1.0 / (2.0 * diameter), kappa)


def attractor_contains_box(points, lo, hi, tol=1e-9) -> bool:
    pts = np.asarray(points)
    return bool(np.all(pts >= np.asarray(lo) - tol) and np.all(pts <= np.asarray(hi) + tol))

