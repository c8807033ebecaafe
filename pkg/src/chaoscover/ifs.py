"""Iterated function systems of contracting similitudes on R^d.

Symbols (map indices) are 1-based throughout the public API, matching the
usual way of writing words such as ``"12"``; arrays handed to the compiled
kernels are 0-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.spatial import ConvexHull

from .errors import BudgetExceededError, InvalidInputError

ORTHO_TOL = 1e-12
PROB_TOL = 1e-12
TIE_TOL = 1e-9
DEFAULT_POINT_BUDGET = 2_000_000


@dataclass(frozen=True, eq=False)
class Similitude:
    """``x -> scale * orthogonal_part @ x + translation``."""

    scale: float
    orthogonal_part: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        scale = float(self.scale)
        if not 0.0 < scale < 1.0:
            raise InvalidInputError(f"similitude scale must lie in (0, 1), got {scale}")
        orth = np.array(self.orthogonal_part, dtype=np.float64)
        if orth.ndim == 0:
            orth = orth.reshape(1, 1)
        trans = np.array(self.translation, dtype=np.float64).reshape(-1)
        d = trans.shape[0]
        if orth.shape != (d, d):
            raise InvalidInputError(f"orthogonal part has shape {orth.shape}, expected {(d, d)}")
        if np.max(np.abs(orth @ orth.T - np.eye(d))) > ORTHO_TOL:
            raise InvalidInputError("orthogonal part is not orthogonal to within 1e-12")
        orth.setflags(write=False)
        trans.setflags(write=False)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "orthogonal_part", orth)
        object.__setattr__(self, "translation", trans)

    @classmethod
    def scaling(cls, scale, translation):
        """Similitude with trivial rotation part."""
        trans = np.atleast_1d(np.asarray(translation, dtype=np.float64))
        return cls(scale, np.eye(trans.shape[0]), trans)

    @property
    def dim(self) -> int:
        return self.translation.shape[0]

    @property
    def linear(self) -> np.ndarray:
        return self.scale * self.orthogonal_part

    def __call__(self, x):
        return self.linear @ np.asarray(x, dtype=np.float64) + self.translation


@dataclass(frozen=True, eq=False)
class IfsSystem:
    maps: tuple
    probs: np.ndarray
    osc_witness: tuple | None = None
    dimension_d: int = field(init=False)

    def __post_init__(self):
        maps = tuple(self.maps)
        if len(maps) < 2:
            raise InvalidInputError("an IFS needs at least two maps")
        dims = {m.dim for m in maps}
        if len(dims) != 1:
            raise InvalidInputError(f"maps act on different dimensions: {sorted(dims)}")
        probs = np.array(self.probs, dtype=np.float64).reshape(-1)
        if probs.shape[0] != len(maps):
            raise InvalidInputError(f"{len(maps)} maps but {probs.shape[0]} probabilities")
        if np.any(probs <= 0.0):
            raise InvalidInputError("probability vector must be nondegenerate (all entries > 0)")
        if abs(probs.sum() - 1.0) > PROB_TOL:
            raise InvalidInputError(f"probabilities sum to {probs.sum()!r}, not 1")
        probs.setflags(write=False)
        d = dims.pop()
        witness = self.osc_witness
        if witness is not None:
            center = np.array(witness[0], dtype=np.float64).reshape(-1)
            eps = float(witness[1])
            if center.shape[0] != d or eps <= 0.0:
                raise InvalidInputError("osc witness needs a d-dimensional center and radius > 0")
            center.setflags(write=False)
            witness = (center, eps)
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "osc_witness", witness)
        object.__setattr__(self, "dimension_d", d)

    @property
    def n_maps(self) -> int:
        return len(self.maps)

    @property
    def ratios(self) -> np.ndarray:
        return np.array([m.scale for m in self.maps])

    @property
    def r_min(self) -> float:
        return min(m.scale for m in self.maps)

    @property
    def r_max(self) -> float:
        return max(m.scale for m in self.maps)

    def with_probs(self, probs) -> "IfsSystem":
        return IfsSystem(self.maps, probs, self.osc_witness)

    def linear_parts(self) -> np.ndarray:
        """Stacked ``scale * orthogonal`` matrices, shape (N, d, d)."""
        return np.stack([m.linear for m in self.maps])

    def translations(self) -> np.ndarray:
        return np.stack([m.translation for m in self.maps])


@dataclass(frozen=True)
class ScalarReport:
    s: float
    t: float
    argmax_set: frozenset
    unique_max: bool
    r_min: float
    r_max: float
    diameter_estimate: float
    diameter_upper: float


def similarity_dimension(ratios) -> float:
    """Unique ``s >= 0`` with ``sum(r_i ** s) == 1``.

    Plain bisection on [0, 20]; the map ``s -> sum r_i^s`` is strictly
    decreasing so the bracket only ever shrinks toward the root.
    """
    r = np.asarray(list(ratios), dtype=np.float64)
    if r.size == 0:
        raise InvalidInputError("similarity dimension of an empty ratio list")
    if np.any(r <= 0.0) or np.any(r >= 1.0):
        raise InvalidInputError("contraction ratios must lie in (0, 1)")
    if r.size == 1:
        return 0.0
    lo, hi = 0.0, 20.0
    while np.sum(r**hi) > 1.0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.sum(r**mid) > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 0.0:
            break
    return 0.5 * (lo + hi)


def exponent_t(system: IfsSystem):
    """Return ``(t, argmax_set, unique_max)`` for ``t = max_i log p_i / log r_i``.

    Indices in ``argmax_set`` are 1-based.  Ties are decided with a relative
    tolerance of 1e-9 on the ratios.
    """
    quotients = np.log(system.probs) / np.log(system.ratios)
    t = float(quotients.max())
    tol = TIE_TOL * max(1.0, abs(t))
    argmax = frozenset(int(i) + 1 for i in np.flatnonzero(quotients >= t - tol))
    return t, argmax, len(argmax) == 1


def _check_symbols(system, word):
    n = system.n_maps
    for sym in word:
        if not 1 <= sym <= n:
            raise InvalidInputError(f"symbol {sym} out of range 1..{n}")


def apply_word(system: IfsSystem, word, point) -> np.ndarray:
    """``S_{i_1}(S_{i_2}(... S_{i_n}(point)))``; the last symbol acts first."""
    symbols = tuple(getattr(word, "symbols", word))
    _check_symbols(system, symbols)
    x = np.array(point, dtype=np.float64).reshape(-1)
    for sym in reversed(symbols):
        x = system.maps[sym - 1](x)
    return x


def apply_words(system: IfsSystem, words, point) -> np.ndarray:
    """Vectorised :func:`apply_word` over many words; returns shape (len(words), d)."""
    words = [tuple(getattr(w, "symbols", w)) for w in words]
    d = system.dimension_d
    out = np.tile(np.asarray(point, dtype=np.float64).reshape(1, d), (len(words), 1))
    if not words:
        return out
    lengths = np.array([len(w) for w in words])
    width = int(lengths.max())
    codes = np.zeros((len(words), width), dtype=np.int64)
    for k, w in enumerate(words):
        _check_symbols(system, w)
        codes[k, : len(w)] = w
    lin = system.linear_parts()
    trans = system.translations()
    for pos in range(width - 1, -1, -1):
        rows = np.flatnonzero(lengths > pos)
        sym = codes[rows, pos] - 1
        out[rows] = np.einsum("nij,nj->ni", lin[sym], out[rows]) + trans[sym]
    return out


def fixed_point(sim: Similitude) -> np.ndarray:
    d = sim.dim
    x = np.linalg.solve(np.eye(d) - sim.linear, sim.translation)
    # one fixed-point iteration polishes the residual without changing the limit
    return sim(x)


def _point_set_diameter(points: np.ndarray) -> float:
    centred = points - points.mean(axis=0)
    if len(points) < 2:
        return 0.0
    _, sing, vt = np.linalg.svd(centred, full_matrices=False)
    rank = int(np.sum(sing > 1e-12 * max(sing[0], 1e-300)))
    if rank == 0:
        return 0.0
    coords = centred @ vt[:rank].T
    if rank == 1:
        return float(np.ptp(coords[:, 0]))
    hull = coords[ConvexHull(coords).vertices]
    diffs = hull[:, None, :] - hull[None, :, :]
    return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", diffs, diffs))))


def level_points(system: IfsSystem, depth: int, budget: int = DEFAULT_POINT_BUDGET) -> np.ndarray:
    """All ``S_w(x*)`` for ``|w| = depth``, ``x*`` the fixed point of the first map."""
    if depth < 1:
        raise InvalidInputError("depth must be a positive integer")
    n = system.n_maps
    if n**depth > budget:
        raise BudgetExceededError(f"{n}^{depth} points exceed the budget of {budget}")
    pts = fixed_point(system.maps[0]).reshape(1, -1)
    lin = system.linear_parts()
    trans = system.translations()
    for _ in range(depth):
        # new point set = union over i of S_i(previous set)
        pts = (np.einsum("nij,mj->nmi", lin, pts) + trans[:, None, :]).reshape(-1, pts.shape[1])
    return pts


def diameter_estimate(system: IfsSystem, depth: int, budget: int = DEFAULT_POINT_BUDGET) -> float:
    """Max pairwise distance of the depth-``depth`` image points of ``x*``.

    A lower bound for diam F that converges as depth grows; see
    :func:`diameter_upper_bound` for the matching rigorous upper bound.
    """
    return _point_set_diameter(level_points(system, depth, budget))


def diameter_upper_bound(estimate: float, r_max: float, depth: int) -> float:
    """Upper bound on diam F given the depth-``depth`` estimate.

    Every point of F is within ``r_max**depth * diam F`` of a sample point, so
    ``diam F <= estimate + 2 r_max**depth diam F``.
    """
    slack = 2.0 * r_max**depth
    return estimate / (1.0 - slack) if slack < 1.0 else math.inf


def attractor_box(system: IfsSystem, depth: int = 8, budget: int = DEFAULT_POINT_BUDGET):
    """Axis-aligned box ``(lo, hi)`` guaranteed to contain the attractor."""
    depth = _affordable_depth(system, depth, budget)
    pts = level_points(system, depth, budget)
    est = _point_set_diameter(pts)
    margin = system.r_max**depth * diameter_upper_bound(est, system.r_max, depth)
    if not math.isfinite(margin):
        margin = est
    return pts.min(axis=0) - margin, pts.max(axis=0) + margin


def _affordable_depth(system, depth, budget):
    while depth > 1 and system.n_maps**depth > budget:
        depth -= 1
    return depth


def scalar_report(system: IfsSystem, depth: int = 8, budget: int = DEFAULT_POINT_BUDGET) -> ScalarReport:
    depth = _affordable_depth(system, depth, budget)
    s = similarity_dimension(system.ratios)
    t, argmax, unique = exponent_t(system)
    diam = diameter_estimate(system, depth, budget)
    return ScalarReport(
        s=s,
        t=t,
        argmax_set=argmax,
        unique_max=unique,
        r_min=system.r_min,
        r_max=system.r_max,
        diameter_estimate=diam,
        diameter_upper=diameter_upper_bound(diam, system.r_max, depth),
    )


def sierpinski(probs=(1 / 3, 1 / 3, 1 / 3), osc_witness=None) -> IfsSystem:
    """Equilateral Sierpinski triangle with vertices (0,0), (1,0), (1/2, sqrt(3)/2)."""
    h = math.sqrt(3.0) / 4.0
    maps = (
        Similitude.scaling(0.5, (0.0, 0.0)),
        Similitude.scaling(0.5, (0.5, 0.0)),
        Similitude.scaling(0.5, (0.25, h)),
    )
    return IfsSystem(maps, probs, osc_witness)


def sierpinski_osc_witness():
    """Ball inside the open triangle centred on an attractor point.

    ``(1/2, sqrt(3)/4)`` is the midpoint of the top sub-triangle's base, so it
    lies in F; its distance to the triangle's sides is ``sqrt(3)/8``.
    """
    return (np.array([0.5, math.sqrt(3.0) / 4.0]), 0.2)


def all_words(n_maps: int, length: int):
    """Every word of the given length, lexicographic, 1-based symbols."""
    return list(product(range(1, n_maps + 1), repeat=length))
