"""Command-line front end.

Exit status: 0 on success, 1 on usage errors (bad flags or parameters),
2 on data errors (unreadable or malformed input, capacity limits).
"""
from __future__ import annotations

import argparse
import contextlib
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import (CapacityError, ContractError, GraphFormatError,
                     InsufficientNodesError, SpecError)
from .evaluation import DEFAULT_LAMBDAS, EvalConfig, PRankSweep, eval_map, write_report
from .graph import load_edge_list, load_labels
from .kernels import SYNTAX, make_kernel, parse_measure
from .montecarlo import DEFAULT_SEED, McConfig, estimate
from .query import DEFAULT_RADIUS, topk
from .solver import SolveConfig, solve, write_table

EXIT_USAGE = 1
EXIT_DATA = 2

DEFAULT_EVAL_MEASURES = ("simrank", "prank:sweep", "simrankstar", "psimrank", "psimrankstar")

log = logging.getLogger("grsp")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: usage error: {message}\n")


def _common(p, measure=True):
    p.add_argument("--graph", required=True, help="edge list, 'src dst' per line (gzip ok)")
    p.add_argument("--reverse", action="store_true", help="flip every edge on load")
    if measure:
        p.add_argument("--measure", default="simrank", help="measure spec, see 'kernels'")
    p.add_argument("--C", type=float, default=0.8, help="decay constant in (0, 1)")
    p.add_argument("-o", "--output", help="output file (default: stdout)")
    p.add_argument("--full-precision", action="store_true",
                   help="print floats at full precision instead of 6 decimals")
    p.add_argument("--workers", type=int, default=1, help="parallel workers")


def _mc_flags(p, samples=200):
    p.add_argument("--samples", type=int, default=samples, help="walks per pair")
    p.add_argument("--max-steps", type=int, default=15, help="walk truncation length")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="random seed")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="grsp", description="Random surfer-pair similarity toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="exact all-pairs similarity table")
    _common(p)
    p.add_argument("--epsilon", type=float, default=1e-9)
    p.add_argument("--k-max", type=int, default=100)
    p.add_argument("--memory-gate", type=int, default=20_000)
    p.add_argument("--threshold", type=float, default=0.0,
                   help="only write entries strictly above this value")
    p.add_argument("--figure", help="write a convergence plot here")

    p = sub.add_parser("estimate", help="Monte Carlo estimate for one pair")
    _common(p)
    p.add_argument("--pair", required=True, help="two node tokens, 'a,b'")
    _mc_flags(p, samples=200)

    p = sub.add_parser("topk", help="top-k similar nodes for a query node")
    _common(p)
    p.add_argument("--query", required=True)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--radius", type=int, default=DEFAULT_RADIUS)
    p.add_argument("--drop-zero", action="store_true", help="omit zero-score answers")
    p.add_argument("--figure", help="write a bar chart of the ranking here")
    _mc_flags(p)

    p = sub.add_parser("eval", help="MAP evaluation against node labels")
    _common(p, measure=False)
    p.add_argument("--labels", required=True, help="'node<TAB>label' lines")
    p.add_argument("--measure", action="append", dest="measures",
                   help="repeatable; 'prank:sweep' sweeps lambda "
                        f"(default: {' '.join(DEFAULT_EVAL_MEASURES)})")
    p.add_argument("--lambdas", help="comma-separated lambdas for prank:sweep")
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--queries", type=int, default=50)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--min-in-degree", type=int, default=5)
    p.add_argument("--min-out-degree", type=int, default=5)
    p.add_argument("--radius", type=int, default=DEFAULT_RADIUS)
    p.add_argument("--figure", help="MAP bar chart (default: next to --output)")
    _mc_flags(p)

    sub.add_parser("kernels", help="list measure specs and their syntax")
    return parser


@contextlib.contextmanager
def _sink(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def _fmt(v: float, full: bool) -> str:
    return repr(float(v)) if full else f"{v:.6f}"


def _mc_config(args) -> McConfig:
    return McConfig(samples=args.samples, max_steps=args.max_steps, C=args.C, seed=args.seed)


def _eval_measures(args):
    lambdas = DEFAULT_LAMBDAS
    if args.lambdas:
        try:
            lambdas = tuple(float(x) for x in args.lambdas.split(","))
        except ValueError:
            raise UsageError(f"bad --lambdas {args.lambdas!r}") from None
        if any(not 0.0 <= lam <= 1.0 for lam in lambdas):
            raise UsageError("lambdas must lie in [0, 1]")
    out = []
    for text in args.measures or DEFAULT_EVAL_MEASURES:
        if text.strip().lower() in ("prank:sweep", "prank:lambda=sweep"):
            out.append(PRankSweep(lambdas))
        else:
            out.append(parse_measure(text))
    return out


def _validate(args):
    """Build every config object up front so bad flags fail fast."""
    if getattr(args, "workers", 1) < 1:
        raise UsageError("--workers must be at least 1")
    if args.command == "solve":
        return SolveConfig(C=args.C, epsilon=args.epsilon, k_max=args.k_max,
                           memory_gate=args.memory_gate), parse_measure(args.measure)
    if args.command == "estimate":
        if len(args.pair.split(",")) != 2:
            raise UsageError("--pair takes two comma-separated node tokens")
        return _mc_config(args), parse_measure(args.measure)
    if args.command == "topk":
        if args.k < 0:
            raise UsageError("--k must be nonnegative")
        if args.radius < 0:
            raise UsageError("--radius must be nonnegative")
        return _mc_config(args), parse_measure(args.measure)
    if args.command == "eval":
        cfg = EvalConfig(k=args.k, num_queries=args.queries, num_trials=args.trials,
                         min_in_degree=args.min_in_degree, min_out_degree=args.min_out_degree,
                         radius=args.radius, mc=_mc_config(args), seed=args.seed)
        return cfg, _eval_measures(args)
    return None, None


def _run(args) -> None:
    try:
        cfg, spec = _validate(args)
    except ContractError as exc:
        raise UsageError(str(exc)) from None
    if args.command == "kernels":
        for syntax, what in SYNTAX:
            print(f"{syntax}\t{what}")
        return
    g = load_edge_list(args.graph, reverse=args.reverse)
    full = args.full_precision

    if args.command == "solve":
        table = solve(g, make_kernel(spec, g), cfg)
        log.info("solve: %d sweeps, final delta %.3g", table.iterations_run, table.final_delta)
        with _sink(args.output) as out:
            write_table(table, out, g.names, args.threshold, None if full else 6)
        if args.figure:
            from .plotting import plot_convergence
            plot_convergence(table, args.figure)

    elif args.command == "estimate":
        ta, tb = (t.strip() for t in args.pair.split(","))
        a, b = g.node_id(ta), g.node_id(tb)
        est = estimate(make_kernel(spec, g), (a, b), cfg, workers=args.workers)
        with _sink(args.output) as out:
            out.write(f"{ta} {tb} {_fmt(est.mean, full)} {_fmt(est.std_error, full)}\n")

    elif args.command == "topk":
        q = g.node_id(args.query)
        res = topk(g, make_kernel(spec, g), q, args.k, args.radius, cfg,
                   drop_zero=args.drop_zero, workers=args.workers)
        with _sink(args.output) as out:
            out.write(f"# query={args.query} candidates={res.candidates_considered}\n")
            out.write("rank\tnode\tmean\tstderr\n")
            for i, (node, mean, se) in enumerate(res.ranked, start=1):
                out.write(f"{i}\t{g.names[node]}\t{_fmt(mean, full)}\t{_fmt(se, full)}\n")
        if args.figure:
            from .plotting import plot_topk
            plot_topk(res, g.names, args.figure)

    elif args.command == "eval":
        labels = load_labels(args.labels, g)
        report = eval_map(g, labels, spec, cfg, workers=args.workers)
        with _sink(args.output) as out:
            write_report(report, out, None if full else 6)
        figure = args.figure
        if figure is None and args.output:
            figure = str(Path(args.output).with_suffix(".png"))
        if figure:
            from .plotting import plot_map
            plot_map(report, figure)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    try:
        _run(args)
    except (UsageError, SpecError) as exc:
        print(f"grsp: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ContractError, OSError, GraphFormatError, CapacityError, InsufficientNodesError) as exc:
        print(f"grsp: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
