"""Delta sweeps, growth-law predictions, exponent fits, covering bounds and images."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .chain import (
    BoundsReport,
    build_chain,
    exact_cover_time,
    harmonic,
    hitting_matrix,
    mc_cover_time,
)
from .chaos import DEFAULT_CAP, NET_SLACK, default_net, orbit_points, waiting_time_samples, summarize
from .errors import InvalidInputError
from .ifs import IfsSystem, attractor_box, exponent_t, similarity_dimension
from .partition import build_partition, enumerate_words, parse_word, word_label
from .rng import SplitMix64, trial_seed

SWEEP_HEADER = (
    "delta", "trials", "mean_W", "std_error", "censored_fraction",
    "prediction_lo", "prediction_hi", "N_delta", "t", "s",
)
MODELS = ("pure-power", "power-times-log")


def fmt(x) -> str:
    """Full-precision decimal rendering used for every number that leaves the process."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


@dataclass(frozen=True)
class TheoryPrediction:
    delta: float
    t: float
    unique_max: bool
    point_prediction: float | None
    band: tuple | None

    @property
    def low(self) -> float:
        return self.band[0] if self.unique_max else self.point_prediction

    @property
    def high(self) -> float:
        return self.band[1] if self.unique_max else self.point_prediction


def theory_prediction(delta: float, t: float, unique_max: bool) -> TheoryPrediction:
    """Growth law of the expected waiting time, up to its unknown constant.

    Tied maximum: ``delta^-t log(1/delta)``.  Unique maximum: the band
    ``delta^-t loglog(1/delta)`` to ``delta^-t loglog(1/delta)^2``.
    """
    if not 0.0 < delta < math.exp(-1.0):
        raise InvalidInputError("predictions need 0 < delta < 1/e")
    scale = delta**-t
    log_inv = math.log(1.0 / delta)
    if unique_max:
        ll = math.log(log_inv)
        return TheoryPrediction(delta, t, True, None, (scale * ll, scale * ll * ll))
    return TheoryPrediction(delta, t, False, scale * log_inv, None)


@dataclass(frozen=True)
class SweepRow:
    delta: float
    trials: int
    mean_W: float
    std_error: float
    censored_fraction: float
    prediction_lo: float
    prediction_hi: float
    N_delta: int
    t: float
    s: float

    @property
    def censored(self) -> bool:
        return self.censored_fraction > 0

    def as_strings(self):
        return [fmt(getattr(self, name)) for name in SWEEP_HEADER]


def run_sweep(system: IfsSystem, deltas, trials: int, master_seed: int,
              net_ratio: float = NET_SLACK, v0=None, cap: int = DEFAULT_CAP, threads=None):
    """One row per delta, in input order.

    Every row reuses the same per-trial seeds, so row ``k`` and row ``k+1``
    see identical symbol streams and their waiting times compare pathwise.
    """
    s = similarity_dimension(system.ratios)
    t, _, unique = exponent_t(system)
    rows = []
    for delta in deltas:
        delta = float(delta)
        net = default_net(system, delta, net_ratio)
        samples = waiting_time_samples(system, v0, delta, net, trials, master_seed, cap, threads)
        est = summarize(samples)
        pred = theory_prediction(delta, t, unique)
        n_delta = len(enumerate_words(system, delta))
        rows.append(SweepRow(delta, int(trials), est.mean, est.std_error, est.censored_fraction,
                             pred.low, pred.high, n_delta, t, s))
    return rows


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for row in rows:
        writer.writerow(row.as_strings())
    return buf.getvalue()


def read_sweep_csv(text: str):
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != SWEEP_HEADER:
        raise InvalidInputError("unexpected sweep CSV header")
    rows = []
    for rec in reader:
        rows.append(SweepRow(
            float(rec["delta"]), int(rec["trials"]), float(rec["mean_W"]), float(rec["std_error"]),
            float(rec["censored_fraction"]), float(rec["prediction_lo"]), float(rec["prediction_hi"]),
            int(rec["N_delta"]), float(rec["t"]), float(rec["s"]),
        ))
    return rows


@dataclass(frozen=True)
class FitResult:
    t_hat: float
    intercept: float
    residual_rms: float
    model: str


def fit_exponent(rows, model: str = "power-times-log") -> FitResult:
    """Least squares for the growth exponent.

    ``pure-power``: ``log W = t log(1/delta) + c``.
    ``power-times-log``: ``log W = t log(1/delta) + log log(1/delta) + c``.
    Censored rows are left out.
    """
    if model not in MODELS:
        raise InvalidInputError(f"model must be one of {MODELS}")
    usable = [r for r in rows if not r.censored and math.isfinite(r.mean_W) and r.mean_W > 0]
    if len(usable) < 3:
        raise InvalidInputError("fitting needs at least three uncensored rows")
    x = np.array([math.log(1.0 / r.delta) for r in usable])
    y = np.log([r.mean_W for r in usable])
    if model == "power-times-log":
        y = y - np.log(x)
    design = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return FitResult(float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid**2))), model)


def fitted_band_constant(rows) -> float:
    """Smallest ``C >= 1`` with ``lo / C <= mean_W <= C * hi`` on every row."""
    c = 1.0
    for r in rows:
        c = max(c, r.prediction_lo / r.mean_W, r.mean_W / r.prediction_hi)
    return c


def write_pbm(path, mask: np.ndarray):
    """Binary portable bitmap (P4); set bits are black pixels."""
    height, width = mask.shape
    with open(path, "wb") as fh:
        fh.write(f"P4\n{width} {height}\n".encode("ascii"))
        fh.write(np.packbits(mask.astype(np.uint8), axis=1).tobytes())


def rasterize(points: np.ndarray, lo, hi, width: int, height: int) -> np.ndarray:
    mask = np.zeros((height, width), dtype=bool)
    span = np.maximum(np.asarray(hi) - np.asarray(lo), 1e-300)
    cols = np.clip(((points[:, 0] - lo[0]) / span[0] * width).astype(np.int64), 0, width - 1)
    if points.shape[1] >= 2:
        rows = np.clip(((points[:, 1] - lo[1]) / span[1] * height).astype(np.int64), 0, height - 1)
        rows = height - 1 - rows
    else:
        rows = np.full(points.shape[0], height // 2)
    mask[rows, cols] = True
    return mask


def render_image(system: IfsSystem, seed: int, width: int, height: int, out,
                 steps: int | None = None, delta: float | None = None,
                 net_ratio: float = NET_SLACK, v0=None, cap: int = DEFAULT_CAP) -> dict:
    """Plot one orbit; with ``delta`` the orbit stops once it is delta-dense."""
    if width < 16 or height < 16:
        raise InvalidInputError("image must be at least 16x16")
    if (steps is None) == (delta is None):
        raise InvalidInputError("give exactly one of steps or delta")
    censored = False
    if delta is not None:
        net = default_net(system, delta, net_ratio)
        w = int(waiting_time_samples(system, v0, delta, net, 1, seed, cap, threads=1)[0])
        censored = w < 0
        steps = cap if censored else w
        # trial 0 of a run uses trial_seed(seed, 0); replay exactly that stream
        stream_seed = trial_seed(seed, 0)
    else:
        stream_seed = seed
    pts = orbit_points(system, v0, stream_seed, int(steps))
    lo, hi = attractor_box(system)
    mask = rasterize(pts, lo, hi, width, height)
    write_pbm(out, mask)
    return {"steps": int(steps), "pixels": int(mask.sum()), "censored": censored}


def bounds_report(system: IfsSystem, delta: float, subset=None, trials: int = 10_000,
                  master_seed: int = 0, threads=None):
    """Covering-time bounds for the chain at ``delta`` checked against simulation.

    ``subset`` (state indices) designates the set used for the subset bounds;
    it defaults to the whole state space.  The walk starts at the subset's
    first state, which the lower bound requires.  Returns ``(report, check)``
    where ``check`` holds the simulated cover time, the exact value when the
    chain is small enough, and whether the bounds bracket them.  A bound
    counts as violated only when it lies more than three standard errors on
    the wrong side of the simulated mean.
    """
    part = build_partition(system, delta)
    chain = build_chain(part)
    n = chain.state_count
    states = sorted(range(n) if subset is None else {int(s) for s in subset})
    if len(states) < 2:
        raise InvalidInputError("the lower bound needs a subset of at least two states")
    if states[0] < 0 or states[-1] >= n:
        raise InvalidInputError("subset contains an unknown state")
    H = hitting_matrix(chain)
    sub = H[np.ix_(states, states)]
    off = sub[~np.eye(len(states), dtype=bool)]
    label = "all" if len(states) == n else ",".join(chain.label(s) for s in states)
    h_all = harmonic(n)
    upper_sub = float(sub.max()) * harmonic(len(states))
    lower_sub = float(off.min()) * harmonic(len(states) - 1)
    report = BoundsReport(
        max_hit=float(H.max()),
        min_hit_offdiag=float(off.min()),
        matthews_upper=float(H.max()) * h_all,
        matthews_upper_subset=(label, upper_sub),
        matthews_lower_subset=(label, lower_sub),
        harmonic=h_all,
    )
    start = states[0]
    subset_arg = None if len(states) == n else states
    mean, se = mc_cover_time(chain, start, trials, master_seed, threads=threads)
    sub_mean, sub_se = mc_cover_time(chain, start, trials, master_seed, subset=subset_arg, threads=threads)
    exact = exact_cover_time(chain, start) if n <= 16 else None
    lower_ok = lower_sub <= mean + 3 * se and (exact is None or lower_sub <= exact)
    upper_ok = mean - 3 * se <= report.matthews_upper and (exact is None or exact <= report.matthews_upper)
    upper_sub_ok = sub_mean - 3 * sub_se <= upper_sub
    check = {
        "start": chain.label(start),
        "mc_mean": mean,
        "mc_std_error": se,
        "mc_subset_mean": sub_mean,
        "mc_subset_std_error": sub_se,
        "exact": exact,
        "lower_ok": lower_ok,
        "upper_ok": upper_ok and upper_sub_ok,
    }
    return report, check


def parse_subset(text: str | None, chain_or_partition):
    """``None``/``all`` -> None; ``random:K[:SEED]`` -> K random states; else comma-separated words."""
    part = getattr(chain_or_partition, "partition", chain_or_partition)
    n = len(part)
    if text is None or text.strip() == "all":
        return None
    text = text.strip()
    if text.startswith("random:"):
        bits = text.split(":")
        k = int(bits[1])
        seed = int(bits[2]) if len(bits) > 2 else 0
        if not 1 <= k <= n:
            raise InvalidInputError(f"random subset size must lie in 1..{n}")
        rng = SplitMix64(seed)
        chosen = []
        pool = list(range(n))
        for _ in range(k):
            idx = int(rng.uniform() * len(pool))
            chosen.append(pool.pop(idx))
        return sorted(chosen)
    return sorted({part.position(parse_word(tok)) for tok in text.split(",") if tok.strip()})


def bounds_csv(report: BoundsReport, check: dict) -> str:
    lines = ["quantity,value"]
    lines.append(f"max_hit,{fmt(report.max_hit)}")
    lines.append(f"min_hit_offdiag,{fmt(report.min_hit_offdiag)}")
    lines.append(f"harmonic,{fmt(report.harmonic)}")
    lines.append(f"matthews_upper,{fmt(report.matthews_upper)}")
    lines.append(f"matthews_upper_subset,{fmt(report.matthews_upper_subset[1])}")
    lines.append(f"matthews_lower_subset,{fmt(report.matthews_lower_subset[1])}")
    lines.append(f"subset,{report.matthews_lower_subset[0]}")
    lines.append(f"start,{check['start']}")
    lines.append(f"mc_mean,{fmt(check['mc_mean'])}")
    lines.append(f"mc_std_error,{fmt(check['mc_std_error'])}")
    lines.append(f"mc_subset_mean,{fmt(check['mc_subset_mean'])}")
    lines.append(f"mc_subset_std_error,{fmt(check['mc_subset_std_error'])}")
    lines.append(f"exact,{'' if check['exact'] is None else fmt(check['exact'])}")
    lines.append(f"lower_ok,{int(check['lower_ok'])}")
    lines.append(f"upper_ok,{int(check['upper_ok'])}")
    return "\n".join(lines) + "\n"


def partition_csv(partition) -> str:
    lines = ["word,ratio,prob"]
    for w in partition.words:
        lines.append(f"{word_label(w.symbols)},{fmt(w.ratio)},{fmt(w.prob)}")
    return "\n".join(lines) + "\n"


def chain_csv(chain) -> str:
    lines = ["state,symbol,target,prob"]
    for i in range(chain.state_count):
        for sym, tgt, prob in chain.transitions(i):
            lines.append(f"{chain.label(i)},{sym},{chain.label(tgt)},{fmt(prob)}")
    return "\n".join(lines) + "\n"
