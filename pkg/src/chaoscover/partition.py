"""Cylinder partitions of symbol space and the reference nets built on them.

A partition at scale ``delta`` holds the words ``w`` with
``r_w <= delta < r_{w^-}``.  Ratios and probabilities of words are products
accumulated left to right, always in the same order, so comparisons against
``delta`` are reproducible bit for bit (``delta = 2**-6`` with ``r = 1/2`` sits
exactly on the boundary and must stay there).
"""

from __future__ import annotations

import bisect
import math
import weakref
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceededError, InvalidInputError, NumericError
from .ifs import IfsSystem, apply_words, diameter_estimate, fixed_point, similarity_dimension

DEFAULT_STATE_BUDGET = 2_000_000
MASS_TOL = 1e-10


@dataclass(frozen=True)
class Word:
    symbols: tuple
    ratio: float
    prob: float

    @classmethod
    def of(cls, system: IfsSystem, symbols) -> "Word":
        symbols = tuple(int(s) for s in symbols)
        ratio, prob = 1.0, 1.0
        for s in symbols:
            if not 1 <= s <= system.n_maps:
                raise InvalidInputError(f"symbol {s} out of range 1..{system.n_maps}")
            ratio *= system.maps[s - 1].scale
            prob *= system.probs[s - 1]
        return cls(symbols, ratio, float(prob))

    def __len__(self):
        return len(self.symbols)

    def __str__(self):
        return word_label(self.symbols)


def word_label(symbols) -> str:
    """``(1, 2) -> "12"``; dotted form once any symbol needs two digits."""
    if any(s > 9 for s in symbols):
        return ".".join(map(str, symbols))
    return "".join(map(str, symbols))


def parse_word(text: str) -> tuple:
    text = text.strip()
    if "." in text:
        return tuple(int(part) for part in text.split("."))
    return tuple(int(ch) for ch in text)


@dataclass(frozen=True, eq=False)
class Partition:
    system: IfsSystem
    delta: float
    words: tuple
    index: dict = field(repr=False)
    ell: int
    ell_max: int

    @classmethod
    def from_words(cls, system: IfsSystem, delta: float, words) -> "Partition":
        """Wrap an explicit word list without validating it (fixtures, damaged copies)."""
        words = tuple(sorted(words, key=lambda w: w.symbols))
        lengths = [len(w) for w in words] or [0]
        return cls(
            system=system,
            delta=float(delta),
            words=words,
            index={w.symbols: k for k, w in enumerate(words)},
            ell=min(lengths),
            ell_max=max(lengths),
        )

    def __len__(self):
        return len(self.words)

    def position(self, word) -> int:
        symbols = tuple(getattr(word, "symbols", word))
        try:
            return self.index[symbols]
        except KeyError:
            raise InvalidInputError(f"word {word_label(symbols)} is not in the partition") from None

    def symbol_tuples(self):
        return [w.symbols for w in self.words]


def _check_delta(system: IfsSystem, delta: float):
    if not 0.0 < delta < system.r_min:
        raise InvalidInputError(f"delta must lie in (0, r_min={system.r_min}), got {delta}")


def enumerate_words(system: IfsSystem, delta: float, budget: int = DEFAULT_STATE_BUDGET):
    """Depth-first enumeration of the partition words, in lexicographic order."""
    _check_delta(system, delta)
    n = system.n_maps
    scales = [m.scale for m in system.maps]
    probs = [float(p) for p in system.probs]
    out = []
    stack = [((), 1.0, 1.0)]
    while stack:
        symbols, ratio, prob = stack.pop()
        if ratio <= delta:
            out.append(Word(symbols, ratio, prob))
            if len(out) > budget:
                raise BudgetExceededError(f"partition exceeds the state budget of {budget} words")
            continue
        for i in range(n, 0, -1):
            stack.append((symbols + (i,), ratio * scales[i - 1], prob * probs[i - 1]))
    return out


def build_partition(system: IfsSystem, delta: float, budget: int = DEFAULT_STATE_BUDGET) -> Partition:
    delta = float(delta)
    part = Partition.from_words(system, delta, enumerate_words(system, delta, budget))
    validate_partition(part)
    return part


def validate_partition(part: Partition):
    """Raise :class:`NumericError` unless every partition invariant holds."""
    system, delta = part.system, part.delta
    for w in part.words:
        parent = Word.of(system, w.symbols[:-1])
        if len(w) < 2 or not (w.ratio <= delta < parent.ratio):
            raise NumericError(f"word {w} violates r_w <= delta < r_(w-)")
    syms = part.symbol_tuples()
    for a, b in zip(syms, syms[1:]):
        if b[: len(a)] == a:
            raise NumericError(f"word {word_label(a)} is a prefix of {word_label(b)}")
    s = similarity_dimension(system.ratios)
    prob_mass = math.fsum(w.prob for w in part.words)
    dim_mass = math.fsum(w.ratio**s for w in part.words)
    if abs(prob_mass - 1.0) > MASS_TOL or abs(dim_mass - 1.0) > MASS_TOL:
        raise NumericError(f"cylinder masses {prob_mass!r}, {dim_mass!r} do not sum to 1")
    lo, hi = cardinality_bounds(system, delta, s)
    if not lo * (1 - 1e-12) <= len(part) <= hi * (1 + 1e-12):
        raise NumericError(f"|P_delta| = {len(part)} outside [{lo}, {hi}]")


def cardinality_bounds(system: IfsSystem, delta: float, s: float | None = None):
    if s is None:
        s = similarity_dimension(system.ratios)
    return delta**-s, system.r_min**-s * delta**-s


def successor(part: Partition, state, symbol: int) -> Word:
    """The partition word that prefixes ``symbol . state``.

    Prepend the symbol and trim the tail: keep the shortest prefix whose
    ratio has dropped to ``delta`` or below.
    """
    symbols = tuple(getattr(state, "symbols", state))
    part.position(symbols)
    system = part.system
    if not 1 <= symbol <= system.n_maps:
        raise InvalidInputError(f"symbol {symbol} out of range 1..{system.n_maps}")
    extended = (symbol,) + symbols
    ratio = 1.0
    for k, s in enumerate(extended):
        ratio *= system.maps[s - 1].scale
        if ratio <= part.delta:
            return part.words[part.position(extended[: k + 1])]
    raise NumericError(f"no prefix of {word_label(extended)} reaches delta")


def verify_markov_property(part: Partition):
    """Check that each ``[i_1 ... i_n]`` is tiled by cylinders ``[i_1 j]``, ``j`` in P.

    The words ``j`` with ``[i_1 j]`` inside ``[w]`` are exactly the partition
    words extending ``w' = i_2 ... i_n``; they must carry the full mass
    ``p_w / p_{i_1}``.  Returns ``(True, None)`` or ``(False, offending_word)``.
    """
    syms = part.symbol_tuples()
    probs = np.array([w.prob for w in part.words])
    p = part.system.probs
    for w in part.words:
        tail = w.symbols[1:]
        lo = bisect.bisect_left(syms, tail)
        hi = len(syms) if not tail else bisect.bisect_left(syms, tail[:-1] + (tail[-1] + 1,))
        covered = p[w.symbols[0] - 1] * math.fsum(probs[lo:hi]) if hi > lo else 0.0
        if abs(covered - w.prob) > MASS_TOL:
            return False, w
    return True, None


def _ceil_ratio(delta: float, r: float) -> int:
    x = math.log(delta) / math.log(r)
    return math.ceil(x - 1e-9)


def length_bounds(part: Partition):
    """Exact ``(min, max)`` word length, cross-checked against closed forms.

    The shortest word is the all-``r_min`` word and the longest the
    all-``r_max`` word, giving ``ceil(log delta / log r_min)`` and
    ``ceil(log delta / log r_max)`` respectively.
    """
    if not part.words:
        raise InvalidInputError("empty partition")
    lengths = [len(w) for w in part.words]
    ell, ell_max = min(lengths), max(lengths)
    system = part.system
    expect = (_ceil_ratio(part.delta, system.r_min), _ceil_ratio(part.delta, system.r_max))
    if (ell, ell_max) != expect:
        raise NumericError(f"scanned lengths {(ell, ell_max)} disagree with closed form {expect}")
    return ell, ell_max


@dataclass(frozen=True, eq=False)
class ReferenceNet:
    rho: float
    base_point: np.ndarray
    points: np.ndarray
    density_radius: float
    diameter: float

    def __len__(self):
        return self.points.shape[0]


def build_net(
    system: IfsSystem,
    rho: float,
    base=None,
    diameter: float | None = None,
    budget: int = DEFAULT_STATE_BUDGET,
) -> ReferenceNet:
    """Points ``S_w(base)`` for ``w`` in the partition at scale ``rho``.

    Every point of the attractor lies within ``rho * diam F`` of one of them.
    ``base`` must be an attractor point and defaults to the first map's fixed
    point.
    """
    rho = float(rho)
    words = enumerate_words(system, rho, budget)
    if base is None:
        base = fixed_point(system.maps[0])
    base = np.asarray(base, dtype=np.float64).reshape(-1)
    if diameter is None:
        diameter = default_diameter(system)
    points = apply_words(system, words, base)
    points.setflags(write=False)
    return ReferenceNet(rho, base, points, rho * diameter, diameter)


_DIAMETER_CACHE = weakref.WeakKeyDictionary()


def default_diameter(system: IfsSystem, max_points: int = 200_000) -> float:
    """Diameter estimate at the deepest level with at most ``max_points`` points."""
    if system not in _DIAMETER_CACHE:
        depth = max(1, int(math.log(max_points) / math.log(system.n_maps)))
        _DIAMETER_CACHE[system] = diameter_estimate(system, depth)
    return _DIAMETER_CACHE[system]
