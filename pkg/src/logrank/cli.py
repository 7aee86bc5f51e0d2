"""Command line front end.

Every subcommand writes a JSON report to stdout (or ``--out``) and a short
summary to stderr.  Given the same input, flags and seed the JSON output is
byte-for-byte identical.

Exit codes: 0 success, 2 bad input, 3 verification failure, 4 budget
exhausted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .extension import (SlackError, WitnessError, ksp_instance, lift, load_pair, nnmf_from_protocol,
                        random_ksp, slack_matrix, xc_report, mono_cover)
from .finder import SamplerConfig, extract_mono, find_almost_mono
from .gamma2 import BudgetMiss
from .matrix import (IntegralMatrix, MatrixError, count_distinct, exact_rank, load_matrix,
                     mono_stats)
from .oracle import OracleRefusal, brute_max_mono_rect, brute_rank, monte_carlo_sheppard
from .protocol import (BuildLimits, PartialBuildError, VerificationError, build_protocol, run,
                       sampling_finder, verify_all)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_VERIFY = 3
EXIT_BUDGET = 4


class CliError(Exception):
    def __init__(self, msg, code):
        super().__init__(msg)
        self.code = code


def _k_sweep(text):
    if text is None:
        return None
    if ":" in text:
        lo, hi = (int(x) for x in text.split(":"))
        return tuple(range(lo, hi + 1))
    return tuple(int(x) for x in text.split(","))


def _config(args) -> SamplerConfig:
    return SamplerConfig(samples=args.samples, seed=args.seed, k=args.k,
                         k_sweep=_k_sweep(args.k_sweep), analytic_k=args.analytic_k,
                         tol=args.tol)


def _load(args) -> IntegralMatrix:
    return load_matrix(args.input, args.delta)


def _build(M, args):
    limits = BuildLimits(max_nodes=args.budget) if args.budget else BuildLimits()
    try:
        return build_protocol(M, sampling_finder(_config(args)), limits)
    except PartialBuildError as exc:
        raise CliError(f"{exc} (nodes={exc.nodes}, depth={exc.depth})", EXIT_BUDGET) from exc


def _verify(tree, args):
    try:
        return verify_all(tree, jobs=args.jobs)
    except VerificationError as exc:
        raise CliError(f"verification failed at pair {exc.pair}: {exc}", EXIT_VERIFY) from exc


# ---------------------------------------------------------------- commands


def cmd_rank(args):
    M = _load(args)
    cert = exact_rank(M)
    n_rows, n_cols = count_distinct(M)
    bound = (M.delta + 1) ** cert.rank
    report = {"shape": list(M.shape), "delta": M.delta, "rank": cert.rank,
              "pivot_rows": list(cert.pivot_rows), "pivot_cols": list(cert.pivot_cols),
              "distinct_rows": n_rows, "distinct_cols": n_cols, "distinct_bound": bound,
              "bound_holds": n_rows <= bound and n_cols <= bound}
    summary = f"rank {cert.rank}; distinct rows {n_rows}, cols {n_cols} <= {bound}"
    return report, summary


def cmd_find_rect(args):
    M = _load(args)
    r = exact_rank(M).rank
    config = _config(args)
    cand = find_almost_mono(M, r, config)
    mono = extract_mono(M, cand.rect, r)
    color, frac = mono_stats(M, mono)
    report = {"k": config.k_values(M, max(r, 1)), "samples": config.samples, "seed": config.seed,
              "rank": r, "best": cand.to_dict(), "stats": cand.stats,
              "mono": {"rows": list(mono.row_ids), "cols": list(mono.col_ids), "color": color,
                       "area": mono.area, "fraction": frac}}
    summary = (f"almost-mono {cand.rect.shape} frac {cand.mono_fraction:.4f} via {cand.source}; "
               f"mono {mono.shape} color {color}")
    return report, summary


def cmd_protocol(args):
    M = _load(args)
    tree = _build(M, args)
    stats = _verify(tree, args)
    report = {"shape": list(M.shape), "delta": M.delta, "stats": stats.to_dict()}
    if args.tree:
        report["tree"] = tree.to_dict()["root"]
    if args.pair:
        a, b = args.pair
        report["transcript"] = run(tree, a, b).to_dict()
    summary = (f"verified {M.n_rows * M.n_cols} pairs; leaves {stats.leaves}, "
               f"depth {stats.depth}, max bits {stats.max_bits}")
    return report, summary


def cmd_nnmf(args):
    M = _load(args)
    tree = _build(M, args)
    stats = _verify(tree, args)
    f = nnmf_from_protocol(tree)
    report = {"leaves": stats.leaves, "max_bits": stats.max_bits,
              "mono_pieces": len(mono_cover(tree)), **f.to_dict()}
    return report, f"inner dimension {f.inner_dim} from {stats.leaves} leaves"


def cmd_slack(args):
    pair = load_pair(args.input)
    S = slack_matrix(pair, args.delta)
    r = exact_rank(S).rank
    report = {"delta": S.delta, "rows": S.tolist(), "rank": r, "n": pair.n}
    return report, f"slack {S.shape}, delta {S.delta}, rank {r}"


def cmd_ksp_gen(args):
    if args.sets is not None:
        sets = [[int(e) for e in part.split(",") if e.strip()] for part in args.sets.split(";")]
        n = len(sets)
        pair = ksp_instance(n, args.N, args.pack, sets)
    else:
        if args.n is None:
            raise CliError("ksp-gen needs --sets or --n", EXIT_INPUT)
        pair = random_ksp(args.n, args.N, args.pack, np.random.default_rng(args.seed), args.density)
    return pair.to_dict(), f"{pair.name}: {pair.v} vertices, {pair.f} inequalities"


def cmd_xc(args):
    pair = load_pair(args.input)
    S = slack_matrix(pair, args.delta)
    tree = _build(S, args)
    stats = _verify(tree, args)
    f = nnmf_from_protocol(tree)
    try:
        K = lift(pair, f)
    except WitnessError as exc:
        raise CliError(f"lift witness failure at vertex {exc.vertex}: {exc}", EXIT_VERIFY) from exc
    report = xc_report(tree, pair, f)
    report.update(max_bits=stats.max_bits, mono_pieces=len(mono_cover(tree)),
                  witnesses_ok=len(K.witnesses) == pair.v, k_inside_q=True)
    return report, (f"{pair.name}: slack rank {report['slack_rank']}, inner dim {f.inner_dim}, "
                    f"all {pair.v} witnesses pass")


def cmd_oracle(args):
    if args.what == "sheppard":
        if not args.u or not args.v:
            raise CliError("sheppard needs --u and --v", EXIT_INPUT)
        u = [float(x) for x in args.u.split(",")]
        v = [float(x) for x in args.v.split(",")]
        est = monte_carlo_sheppard(u, v, args.trials, args.seed)
        return ({"estimate": est.estimate, "stderr": est.stderr, "trials": est.trials},
                f"{est.estimate:.5f} +/- {est.stderr:.5f}")
    if args.input is None:
        raise CliError("oracle needs an input matrix", EXIT_INPUT)
    M = _load(args)
    if args.what == "rank":
        r = brute_rank(M.tolist(), cap=max(M.shape))
        return {"rank": r}, f"rank {r}"
    R = brute_max_mono_rect(M, cap=args.cap)
    color, _ = mono_stats(M, R)
    return ({"rows": list(R.row_ids), "cols": list(R.col_ids), "color": color, "area": R.area},
            f"max monochromatic rectangle area {R.area}")


# ---------------------------------------------------------------- parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--samples", type=int, default=32, help="draws per k")
    common.add_argument("--k", type=int, default=None, help="fixed number of cuts")
    common.add_argument("--k-sweep", default=None, help="'lo:hi' or comma list of k values")
    common.add_argument("--analytic-k", action="store_true",
                        help="use the k from the existence argument (tiny rectangles)")
    common.add_argument("--tol", type=float, default=1e-8)
    common.add_argument("--budget", type=int, default=None, help="max protocol tree nodes")
    common.add_argument("--delta", type=int, default=None, help="declared entry bound")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--out", default=None, help="write the report here instead of stdout")

    parser = argparse.ArgumentParser(prog="logrank", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rank", parents=[common], help="exact rank and distinct-line bound")
    p.add_argument("input")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("find-rect", parents=[common], help="sample and extract a mono rectangle")
    p.add_argument("input")
    p.set_defaults(func=cmd_find_rect)

    p = sub.add_parser("protocol", parents=[common], help="build and verify the protocol")
    p.add_argument("input")
    p.add_argument("--tree", action="store_true", help="include the serialized tree")
    p.add_argument("--pair", type=int, nargs=2, metavar=("A", "B"), help="dump one transcript")
    p.set_defaults(func=cmd_protocol)

    p = sub.add_parser("nnmf", parents=[common], help="nonnegative factorization from leaves")
    p.add_argument("input")
    p.set_defaults(func=cmd_nnmf)

    p = sub.add_parser("slack", parents=[common], help="slack matrix of a polytope pair")
    p.add_argument("input")
    p.set_defaults(func=cmd_slack)

    p = sub.add_parser("ksp-gen", parents=[common], help="k-Set-Packing polytope pair")
    p.add_argument("--n", type=int, default=None, help="number of sets (random mode)")
    p.add_argument("--N", type=int, required=True, help="ground set size")
    p.add_argument("--pack", type=int, required=True,
                   help="how many chosen sets may share an element (k)")
    p.add_argument("--sets", default=None, help="explicit sets, e.g. '1,2;2,3;3'")
    p.add_argument("--density", type=float, default=0.3)
    p.set_defaults(func=cmd_ksp_gen)

    p = sub.add_parser("xc", parents=[common], help="slack -> protocol -> nnmf -> lift")
    p.add_argument("input")
    p.set_defaults(func=cmd_xc)

    p = sub.add_parser("oracle", parents=[common], help="brute-force references")
    p.add_argument("what", choices=("rank", "mono", "sheppard"))
    p.add_argument("input", nargs="?")
    p.add_argument("--u", default=None)
    p.add_argument("--v", default=None)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--cap", type=int, default=10)
    p.set_defaults(func=cmd_oracle)
    return parser


def _text(report, indent=0) -> str:
    lines = []
    for key, val in report.items():
        if isinstance(val, dict):
            lines.append(" " * indent + f"{key}:")
            lines.append(_text(val, indent + 2))
        else:
            lines.append(" " * indent + f"{key}: {val}")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        report, summary = args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (MatrixError, SlackError, OSError, ValueError, OracleRefusal) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BudgetMiss as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    if args.format == "json":
        text = json.dumps(report, sort_keys=True)
    else:
        text = _text(report)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    print(summary, file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
