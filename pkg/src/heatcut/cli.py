"""Command-line front end: ``heatcut gen | partition | expmv | polyfit``.

Exit codes: 0 on success, 1 on usage or input errors, 2 when ``partition`` ends
in Fail (or in NoCert when ``--nocert-exit-2`` is given).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import polyapprox as pa
from .expmv import choose_params, dense_expmv, exprational, expmv_lanczos, expmv_taylor
from .graph import GraphError, GraphSpec, generate, load_edge_list
from .operators import ProjectedExponent, norm_of, projected_inverter
from .partition import BalSepConfig, Fail, NoCert, balsep
from .report import dumps, envelope

EXIT_OK, EXIT_USAGE, EXIT_RESULT = 0, 1, 2

SCHEMA_HELP = """\
output schema (JSON, "schema": 1):
  partition: {"schema", "command", "result": "balanced_cut"|"no_cert"|"fail", "iteration",
              "cut": {"side", "conductance", "balance", "boundary"}, "params", "iterations"}
  expmv:     {"schema", "command", "method", "n", "tau", "delta", "result": [...]}
  polyfit:   {"schema", "command", "interval", "delta", "degree", "measured_error", "lower_bound"}
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _threads(value) -> int:
    if value is None:
        value = os.environ.get("HEATCUT_THREADS", "1")
    try:
        n = int(value)
    except ValueError:
        raise UsageError(f"invalid thread count {value!r}") from None
    if n < 0:
        raise UsageError("thread count must be >= 0")
    return n or (os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="heatcut", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter, epilog=SCHEMA_HELP)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("gen", help="write a generated graph as an edge list")
    g.add_argument("--type", required=True, choices=["clique", "path", "regular", "planted", "dumbbell"])
    g.add_argument("--n", type=int, default=0)
    g.add_argument("--d", type=int, default=3)
    g.add_argument("--cross", type=int, default=1)
    g.add_argument("--left", type=int, default=0)
    g.add_argument("--right", type=int, default=0)
    g.add_argument("--bridge", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output")

    def graph_source(sp):
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("-i", "--input", help="edge-list file ('-' for stdin)")
        src.add_argument("--generate", metavar="SPEC", help="generator spec, e.g. planted:n=200,d=3,cross=4")
        sp.add_argument("--graph-seed", type=int, default=0, help="seed for --generate")

    def common(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=None, help="worker threads (0 = all cores)")
        sp.add_argument("--timing", action="store_true", help="add wall-clock seconds to the report")
        sp.add_argument("--figure", help="write a PNG figure to this path")
        sp.add_argument("-o", "--output", help="write JSON here instead of stdout")

    pt = sub.add_parser("partition", help="run BalSep")
    graph_source(pt)
    pt.add_argument("-b", "--balance", type=float, required=True)
    pt.add_argument("--gamma", type=float, required=True)
    pt.add_argument("--backend", choices=["exprational", "lanczos"])
    pt.add_argument("--config", help="key=value configuration file")
    pt.add_argument("--lambda2", action="store_true", help="report a dense lambda_2 estimate with NoCert")
    pt.add_argument("--nocert-exit-2", action="store_true", help="exit with status 2 on NoCert")
    common(pt)

    ex = sub.add_parser("expmv", help="exp(-tau C) v for the heat-kernel exponent of a graph")
    graph_source(ex)
    ex.add_argument("--tau", type=float, default=1.0)
    ex.add_argument("--delta", type=float, default=1e-8)
    ex.add_argument("--method", choices=["exprational", "lanczos", "taylor", "dense"], default="exprational")
    ex.add_argument("--check", action="store_true", help="also report the error against the dense oracle")
    common(ex)

    pf = sub.add_parser("polyfit", help="empirical minimal degree for exp(-x) on [a, b]")
    pf.add_argument("--a", type=float, required=True)
    pf.add_argument("--b", type=float, required=True)
    pf.add_argument("--delta", type=float, required=True)
    pf.add_argument("--sweep", help="comma-separated widths W for a degree-scaling sweep on [a, a+W]")
    common(pf)
    return p


def _load_graph(args):
    if args.generate:
        return generate(args.generate, args.graph_seed)
    if args.input == "-":
        return load_edge_list(sys.stdin.buffer.read())
    try:
        return load_edge_list(Path(args.input).read_bytes())
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc}") from None


def _emit(args, payload: dict, start: float):
    if args.timing:
        payload["timing_seconds"] = time.perf_counter() - start
    text = dumps(payload)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_gen(args) -> int:
    spec = GraphSpec(kind=args.type, n=args.n, d=args.d, cross=args.cross,
                     left=args.left, right=args.right, bridge=args.bridge)
    g = generate(spec, args.seed)
    text = g.to_edge_list()
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_partition(args) -> int:
    start = time.perf_counter()
    g = _load_graph(args)
    b, gamma = args.balance, args.gamma
    if not 0 < b <= 0.5:
        raise UsageError("-b must lie in (0, 1/2]")
    if not 1.0 / g.n**2 <= gamma < 1:
        raise UsageError(f"--gamma must lie in [1/n^2, 1) = [{1.0 / g.n**2:.3g}, 1)")
    overrides = {"seed": args.seed, "threads": _threads(args.threads), "backend": args.backend,
                 "estimate_lambda2": True if args.lambda2 else None}
    if args.config:
        try:
            cfg = BalSepConfig.from_text(Path(args.config).read_text(), **overrides)
        except OSError as exc:
            raise UsageError(f"cannot read {args.config}: {exc}") from None
    else:
        cfg = BalSepConfig(**{k: v for k, v in overrides.items() if v is not None})
    result = balsep(g, b, gamma, cfg)
    payload = envelope("partition", result.to_json())
    payload["config"] = {k: v for k, v in cfg.to_json().items() if k != "threads"}
    if g.labels is not None and not np.array_equal(g.labels, np.arange(g.n)):
        payload["labels"] = g.labels.tolist()
    if args.figure:
        from .plotting import plot_psi_trajectory

        plot_psi_trajectory(result, args.figure)
    _emit(args, payload, start)
    if isinstance(result, Fail) or (isinstance(result, NoCert) and args.nocert_exit_2):
        return EXIT_RESULT
    return EXIT_OK


def cmd_expmv(args) -> int:
    start = time.perf_counter()
    g = _load_graph(args)
    if not 0 < args.delta <= 1:
        raise UsageError("--delta must lie in (0, 1]")
    if args.tau < 0:
        raise UsageError("--tau must be non-negative")
    P = ProjectedExponent.from_ahk(g, None, args.tau)
    A = P.operator()
    v = np.random.default_rng(args.seed).standard_normal(g.n)
    v /= np.linalg.norm(v)
    body = {"method": args.method, "n": g.n, "tau": args.tau, "delta": args.delta}
    if args.method == "exprational":
        params = choose_params(norm_of(A), args.delta)
        u = exprational(A, projected_inverter(P), v, args.delta, params=params)
        body["params"] = params.to_json()
    elif args.method == "lanczos":
        u = expmv_lanczos(A, v, args.delta)
    elif args.method == "taylor":
        u = expmv_taylor(A, v, args.delta)
    else:
        u = dense_expmv(P.dense(), v)
    if args.check:
        body["dense_error"] = float(np.linalg.norm(u - dense_expmv(P.dense(), v)))
    body["result"] = u
    _emit(args, envelope("expmv", body), start)
    return EXIT_OK


def cmd_polyfit(args) -> int:
    start = time.perf_counter()
    a, b, delta = args.a, args.b, args.delta
    if not b > a:
        raise UsageError("--b must exceed --a")
    if not 0 < delta < 1:
        raise UsageError("--delta must lie in (0, 1)")
    d = pa.minimal_degree_empirical(a, b, delta)
    p = pa.cheb_interpolate_exp(a, b, d)
    lb = pa.degree_lower_bound(a, b, delta)
    body = {
        "interval": [a, b],
        "delta": delta,
        "degree": d,
        "measured_error": p.measured_error,
        "grid_size": p.grid_size,
        "lower_bound": lb.degree,
        "lower_bound_applicable": lb.applicable,
        "upper_bound_guide": pa.degree_upper_bound(a, b, delta),
    }
    if args.sweep:
        try:
            widths = [float(w) for w in args.sweep.split(",")]
        except ValueError:
            raise UsageError("--sweep expects comma-separated numbers") from None
        if any(w <= 0 for w in widths):
            raise UsageError("--sweep widths must be positive")
        degs = [pa.minimal_degree_empirical(a, a + w, delta) for w in widths]
        lows = [pa.degree_lower_bound(a, a + w, delta).degree for w in widths]
        body["sweep"] = [{"width": w, "degree": k, "lower_bound": lo} for w, k, lo in zip(widths, degs, lows)]
    if args.figure:
        from .plotting import plot_degree_scaling, plot_residual

        if args.sweep:
            plot_degree_scaling(widths, degs, args.figure, lower=lows, delta=delta)
        else:
            plot_residual(p, args.figure)
    _emit(args, envelope("polyfit", body), start)
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "partition": cmd_partition, "expmv": cmd_expmv, "polyfit": cmd_polyfit}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        return COMMANDS[args.command](args)
    except (UsageError, GraphError, ValueError) as exc:
        sys.stderr.write(f"heatcut: error: {exc}\n")
        sys.stderr.write(parser.format_usage())
        sys.stderr.write(SCHEMA_HELP)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
