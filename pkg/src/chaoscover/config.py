"""Plain-text system descriptions.

One declaration per line::

    dim = 2
    map = 1/2  1 0 0 1  0 0        # scale, orthogonal part row-major, translation
    probs = 1/3 1/3 1/3
    osc_ball = 1/2 0.4330127018922193 0.2   # optional: centre, radius

Numbers are decimals or fractions ``a/b``; ``#`` starts a comment.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .errors import InvalidInputError
from .ifs import IfsSystem, Similitude


def parse_number(tok: str, lineno: int = 0) -> float:
    try:
        return float(Fraction(tok))
    except (ValueError, ZeroDivisionError):
        raise InvalidInputError(f"line {lineno}: bad number {tok!r}") from None


def parse_config(text: str) -> IfsSystem:
    dim = None
    maps = []
    probs = None
    osc = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"line {lineno}: expected 'key = values'")
        key, _, rest = line.partition("=")
        key = key.strip()
        vals = [parse_number(tok, lineno) for tok in rest.split()]
        if key == "dim":
            if dim is not None or len(vals) != 1 or vals[0] != int(vals[0]) or vals[0] < 1:
                raise InvalidInputError(f"line {lineno}: dim must be a single positive integer, given once")
            dim = int(vals[0])
        elif key == "map":
            if dim is None:
                raise InvalidInputError(f"line {lineno}: dim must come before the maps")
            if len(vals) != 1 + dim * dim + dim:
                raise InvalidInputError(f"line {lineno}: a map needs {1 + dim * dim + dim} numbers")
            orth = np.array(vals[1:1 + dim * dim]).reshape(dim, dim)
            maps.append(Similitude(vals[0], orth, np.array(vals[1 + dim * dim:])))
        elif key == "probs":
            probs = vals
        elif key == "osc_ball":
            if dim is None or len(vals) != dim + 1:
                raise InvalidInputError(f"line {lineno}: osc_ball needs a centre of dimension dim and a radius")
            osc = (tuple(vals[:dim]), vals[dim])
        else:
            raise InvalidInputError(f"line {lineno}: unknown key {key!r}")
    if not maps:
        raise InvalidInputError("config declares no maps")
    if probs is None:
        raise InvalidInputError("config declares no probs")
    return IfsSystem(tuple(maps), probs, osc)


def load_config(path) -> IfsSystem:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InvalidInputError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)
