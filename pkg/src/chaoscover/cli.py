"""Command-line entry point: ``chaoscover <command> --config FILE ...``.

Exit codes: 0 success, 2 invalid input, 3 budget exceeded, 4 numeric
failure, 5 some results were censored (reports are still written).
"""

from __future__ import annotations

import argparse
import re
import sys

import numpy as np

from . import chain as chain_mod
from .chaos import DEFAULT_CAP, NET_SLACK, default_net, summarize, waiting_time_samples
from .config import load_config, parse_number
from .errors import ChaosCoverError, InvalidInputError
from .experiments import (
    MODELS,
    bounds_csv,
    bounds_report,
    chain_csv,
    fit_exponent,
    fmt,
    parse_subset,
    partition_csv,
    render_image,
    run_sweep,
    sweep_csv,
    theory_prediction,
)
from .ifs import scalar_report
from .parallel import set_threads
from .partition import build_partition, cardinality_bounds, length_bounds, verify_markov_property
from .rng import trial_seeds

EXIT_CENSORED = 5


def parse_delta(text: str) -> float:
    """Decimal, fraction ``a/b`` or power ``b^e`` (e.g. ``2^-6``)."""
    text = text.strip()
    m = re.fullmatch(r"([0-9.]+)\^(-?[0-9]+)", text)
    if m:
        return float(m.group(1)) ** int(m.group(2))
    return parse_number(text)


def parse_delta_list(text: str):
    return [parse_delta(tok) for tok in text.split(",") if tok.strip()]


def parse_point(text: str):
    return np.array([parse_number(tok) for tok in text.split(",")])


def parse_size(text: str):
    m = re.fullmatch(r"(\d+)[xX](\d+)", text.strip())
    if not m:
        raise InvalidInputError(f"size must look like WxH, got {text!r}")
    return int(m.group(1)), int(m.group(2))


def emit(out, pairs):
    for key, val in pairs:
        out.write(f"{key}={val}\n")


def cmd_dims(args, out):
    system = load_config(args.config)
    rep = scalar_report(system)
    emit(out, [
        ("s", fmt(rep.s)),
        ("t", fmt(rep.t)),
        ("argmax", ",".join(str(i) for i in sorted(rep.argmax_set))),
        ("unique_max", int(rep.unique_max)),
        ("r_min", fmt(rep.r_min)),
        ("r_max", fmt(rep.r_max)),
        ("diameter_estimate", fmt(rep.diameter_estimate)),
        ("diameter_upper", fmt(rep.diameter_upper)),
    ])
    return 0


def cmd_partition(args, out):
    system = load_config(args.config)
    part = build_partition(system, args.delta)
    lo, hi = cardinality_bounds(system, args.delta)
    ell, ell_max = length_bounds(part)
    ok, _ = verify_markov_property(part)
    emit(out, [
        ("delta", fmt(args.delta)),
        ("N_delta", len(part)),
        ("N_lower", fmt(lo)),
        ("N_upper", fmt(hi)),
        ("shortest", ell),
        ("longest", ell_max),
        ("markov_property", int(ok)),
    ])
    if args.dump:
        with open(args.dump, "w", encoding="utf-8", newline="") as fh:
            fh.write(partition_csv(part))
    return 0 if ok else 4


def cmd_chain(args, out):
    system = load_config(args.config)
    part = build_partition(system, args.delta)
    ch = chain_mod.build_chain(part)
    pairs = [("delta", fmt(args.delta)), ("states", ch.state_count)]
    ok = True
    if args.check_all:
        rows = np.asarray(ch.matrix.sum(axis=1)).ravel()
        row_err = float(np.max(np.abs(rows - 1.0)))
        stat_err = chain_mod.verify_stationary(ch)
        irreducible = chain_mod.is_irreducible(ch)
        ret_err = 0.0
        for j in range(ch.state_count):
            prof = chain_mod.hitting_times(ch, j)
            ret_err = max(ret_err, abs(prof.expected_return * ch.stationary[j] - 1.0))
        ok = row_err <= chain_mod.ROW_TOL and stat_err <= chain_mod.STATIONARY_TOL and irreducible
        pairs += [
            ("row_sum_error", fmt(row_err)),
            ("stationary_residual", fmt(stat_err)),
            ("irreducible", int(irreducible)),
            ("return_time_rel_error", fmt(ret_err)),
            ("checks_pass", int(ok)),
        ]
    emit(out, pairs)
    if args.dump:
        with open(args.dump, "w", encoding="utf-8", newline="") as fh:
            fh.write(chain_csv(ch))
    else:
        out.write(chain_csv(ch))
    return 0 if ok else 4


def cmd_bounds(args, out):
    system = load_config(args.config)
    part = build_partition(system, args.delta)
    subset = parse_subset(args.subset, part)
    report, check = bounds_report(system, args.delta, subset, args.trials, args.seed)
    out.write(bounds_csv(report, check))
    return 0 if check["lower_ok"] and check["upper_ok"] else 4


def cmd_simulate(args, out):
    system = load_config(args.config)
    v0 = None if args.v0 is None else parse_point(args.v0)
    net = default_net(system, args.delta, args.net_ratio)
    samples = waiting_time_samples(system, v0, args.delta, net, args.trials, args.seed, args.cap)
    est = summarize(samples)
    if args.samples:
        with open(args.samples, "w", encoding="utf-8", newline="") as fh:
            fh.write("delta,seed,steps,censored\n")
            for seed, steps in zip(trial_seeds(args.seed, args.trials), samples):
                censored = int(steps < 0)
                fh.write(f"{fmt(args.delta)},{int(seed)},{args.cap if censored else int(steps)},{censored}\n")
    rep = scalar_report(system)
    pred = theory_prediction(args.delta, rep.t, rep.unique_max) if args.delta < np.exp(-1) else None
    emit(out, [
        ("delta", fmt(args.delta)),
        ("trials", args.trials),
        ("net_points", len(net)),
        ("mean_W", fmt(est.mean)),
        ("std_error", fmt(est.std_error)),
        ("censored_fraction", fmt(est.censored_fraction)),
        ("prediction_lo", "" if pred is None else fmt(pred.low)),
        ("prediction_hi", "" if pred is None else fmt(pred.high)),
    ])
    return EXIT_CENSORED if est.censored_fraction > 0 else 0


def cmd_sweep(args, out):
    system = load_config(args.config)
    rows = run_sweep(system, args.deltas, args.trials, args.seed, args.net_ratio, cap=args.cap)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write(sweep_csv(rows))
    if args.fit:
        fit = fit_exponent(rows, args.fit)
        emit(out, [
            ("model", fit.model),
            ("t_hat", fmt(fit.t_hat)),
            ("intercept", fmt(fit.intercept)),
            ("residual_rms", fmt(fit.residual_rms)),
            ("t", fmt(rows[0].t)),
        ])
    return EXIT_CENSORED if any(r.censored for r in rows) else 0


def cmd_render(args, out):
    system = load_config(args.config)
    width, height = parse_size(args.size)
    info = render_image(system, args.seed, width, height, args.out,
                        steps=args.steps, delta=args.delta, cap=args.cap)
    emit(out, [("steps", info["steps"]), ("pixels", info["pixels"]), ("censored", int(info["censored"]))])
    return EXIT_CENSORED if info["censored"] else 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="system description file")
    common.add_argument("--threads", type=int, default=None, help="worker threads (results do not depend on it)")

    def delta_arg(p, required=True):
        p.add_argument("--delta", type=parse_delta, required=required, help="e.g. 0.015625, 1/64 or 2^-6")

    parser = argparse.ArgumentParser(prog="chaoscover", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dims", parents=[common], help="dimension, exponent and diameter")
    p.set_defaults(func=cmd_dims)

    p = sub.add_parser("partition", parents=[common], help="build and validate the delta partition")
    delta_arg(p)
    p.add_argument("--dump", help="write word,ratio,prob CSV here")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("chain", parents=[common], help="build the word chain and dump its transitions")
    delta_arg(p)
    p.add_argument("--check-all", action="store_true", help="verify stochasticity, stationarity, irreducibility")
    p.add_argument("--dump", help="write the transition CSV here instead of stdout")
    p.set_defaults(func=cmd_chain)

    p = sub.add_parser("bounds", parents=[common], help="covering-time bounds against simulation")
    delta_arg(p)
    p.add_argument("--subset", default=None, help="'all', 'random:K[:SEED]' or comma-separated words")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("simulate", parents=[common], help="mean waiting time at one delta")
    delta_arg(p)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--v0", default=None, help="start point, comma-separated")
    p.add_argument("--samples", default=None, help="write delta,seed,steps,censored per trial here")
    p.add_argument("--net-ratio", type=parse_number, default=NET_SLACK)
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", parents=[common], help="waiting times over a list of deltas")
    p.add_argument("--deltas", type=parse_delta_list, required=True, help="comma-separated")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fit", choices=MODELS, default=None)
    p.add_argument("--net-ratio", type=parse_number, default=NET_SLACK)
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("render", parents=[common], help="draw one orbit as a PBM image")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--steps", type=int)
    mode.add_argument("--delta", type=parse_delta)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--size", default="512x512")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    set_threads(args.threads)
    try:
        return args.func(args, out)
    except ChaosCoverError as exc:
        print(f"chaoscover: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"chaoscover: {exc}", file=sys.stderr)
        return 2
    finally:
        set_threads(None)


if __name__ == "__main__":
    sys.exit(main())
