"""Compiled inner loops.

All kernels are ``nogil`` so trial batches can be spread over a thread pool.
Each consumes exactly one SplitMix64 draw per step and maps it to a symbol by
inverse CDF, so the geometric and symbolic walks started from the same seed
see the same symbol stream.
"""

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TO_UNIT = 1.0 / 9007199254740992.0

_opts = dict(cache=True, nogil=True)


@njit(**_opts)
def _mix(z):
    z = (z ^ (z >> _S30)) * _MUL1
    z = (z ^ (z >> _S27)) * _MUL2
    return z ^ (z >> _S31)


@njit(**_opts)
def _step(state):
    state = state + _GOLDEN
    return state, _mix(state)


@njit(**_opts)
def _draw(cum, u):
    k = np.searchsorted(cum, u, side="right")
    n = cum.shape[0]
    return k if k < n else n - 1


@njit(**_opts)
def _uniform(bits):
    return np.float64(bits >> _S11) * _TO_UNIT


@njit(**_opts)
def symbol_stream(seed, cum, n):
    """First ``n`` 0-based symbols of the stream seeded with ``seed``."""
    out = np.empty(n, dtype=np.int64)
    state = np.uint64(seed)
    for k in range(n):
        state, bits = _step(state)
        out[k] = _draw(cum, _uniform(bits))
    return out


@njit(**_opts)
def mark_point(p, pts, order, cell_start, cell_uncov, flags, origin, inv_h, dims, strides, offsets, r2, scratch):
    """Flag every uncovered net point within sqrt(r2) of ``p``; return how many were new."""
    d = p.shape[0]
    for k in range(d):
        c = int(np.floor((p[k] - origin[k]) * inv_h))
        if c < -1 or c > dims[k]:
            return 0
        scratch[k] = c
    newly = 0
    for o in range(offsets.shape[0]):
        cell = 0
        inside = True
        for k in range(d):
            c = scratch[k] + offsets[o, k]
            if c < 0 or c >= dims[k]:
                inside = False
                break
            cell += c * strides[k]
        if not inside or cell_uncov[cell] == 0:
            continue
        for m in range(cell_start[cell], cell_start[cell + 1]):
            q = order[m]
            if flags[q]:
                continue
            dist2 = 0.0
            for k in range(d):
                diff = pts[q, k] - p[k]
                dist2 += diff * diff
            if dist2 <= r2:
                flags[q] = True
                cell_uncov[cell] -= 1
                newly += 1
    return newly


@njit(**_opts)
def _apply(lin, trans, sym, x, out):
    d = x.shape[0]
    for i in range(d):
        acc = trans[sym, i]
        for j in range(d):
            acc += lin[sym, i, j] * x[j]
        out[i] = acc


@njit(**_opts)
def geometric_wait(seed, v0, lin, trans, cum, pts, order, cell_start, cell_count,
                   origin, inv_h, dims, strides, offsets, r2, cap):
    """First n with every net point within the radius of {x_0, ..., x_n}; -1 if censored."""
    d = v0.shape[0]
    flags = np.zeros(pts.shape[0], dtype=np.bool_)
    cell_uncov = cell_count.copy()
    scratch = np.empty(d, dtype=np.int64)
    x = v0.copy()
    y = np.empty(d)
    remaining = pts.shape[0]
    remaining -= mark_point(x, pts, order, cell_start, cell_uncov, flags, origin, inv_h,
                            dims, strides, offsets, r2, scratch)
    if remaining == 0:
        return 0
    state = np.uint64(seed)
    for n in range(1, cap + 1):
        state, bits = _step(state)
        sym = _draw(cum, _uniform(bits))
        _apply(lin, trans, sym, x, y)
        x, y = y, x
        remaining -= mark_point(x, pts, order, cell_start, cell_uncov, flags, origin, inv_h,
                                dims, strides, offsets, r2, scratch)
        if remaining == 0:
            return n
    return -1


@njit(**_opts)
def geometric_wait_batch(seeds, v0, lin, trans, cum, pts, order, cell_start, cell_count,
                         origin, inv_h, dims, strides, offsets, r2, cap):
    out = np.empty(seeds.shape[0], dtype=np.int64)
    for k in range(seeds.shape[0]):
        out[k] = geometric_wait(seeds[k], v0, lin, trans, cum, pts, order, cell_start, cell_count,
                                origin, inv_h, dims, strides, offsets, r2, cap)
    return out


@njit(**_opts)
def orbit(seed, v0, lin, trans, cum, n):
    """Points x_0..x_n of the chaos game; shape (n + 1, d)."""
    d = v0.shape[0]
    out = np.empty((n + 1, d))
    out[0] = v0
    state = np.uint64(seed)
    for k in range(1, n + 1):
        state, bits = _step(state)
        sym = _draw(cum, _uniform(bits))
        _apply(lin, trans, sym, out[k - 1], out[k])
    return out


@njit(**_opts)
def chain_cover(seed, table, cum_rows, start, need, cap):
    """Steps until every state flagged in ``need`` has been visited (start counts at t=0).

    Returns -1 when ``cap`` steps pass first.
    """
    pending = need.copy()
    remaining = 0
    for k in range(pending.shape[0]):
        if pending[k]:
            remaining += 1
    cur = start
    if pending[cur]:
        pending[cur] = False
        remaining -= 1
    if remaining == 0:
        return 0
    state = np.uint64(seed)
    for n in range(1, cap + 1):
        state, bits = _step(state)
        sym = _draw(cum_rows[cur], _uniform(bits))
        cur = table[cur, sym]
        if pending[cur]:
            pending[cur] = False
            remaining -= 1
            if remaining == 0:
                return n
    return -1


@njit(**_opts)
def chain_cover_batch(seeds, table, cum_rows, start, need, cap):
    out = np.empty(seeds.shape[0], dtype=np.int64)
    for k in range(seeds.shape[0]):
        out[k] = chain_cover(seeds[k], table, cum_rows, start, need, cap)
    return out


@njit(**_opts)
def fresh_appearance_batch(seeds, cum, word, cap):
    """First t >= len(word) at which the newest len(word) symbols, newest first, spell ``word``."""
    m = word.shape[0]
    out = np.empty(seeds.shape[0], dtype=np.int64)
    ring = np.empty(m, dtype=np.int64)
    for k in range(seeds.shape[0]):
        state = np.uint64(seeds[k])
        out[k] = -1
        for t in range(1, cap + 1):
            state, bits = _step(state)
            ring[t % m] = _draw(cum, _uniform(bits))
            if t < m:
                continue
            hit = True
            for j in range(m):
                # word[0] is the newest symbol, word[m-1] the oldest of the window
                if ring[(t - j) % m] != word[j]:
                    hit = False
                    break
            if hit:
                out[k] = t
                break
    return out
