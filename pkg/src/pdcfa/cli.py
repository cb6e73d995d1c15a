"""Command-line front end.

    pdcfa run FILE --analysis pdcfa-gc --k 1 --format summary
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .syntax import parse_and_normalize, print_anf, ParseError, UnboundVariable
from .concrete import run as concrete_run
from .abstract import Mono, OneCFA, KCFA
from .analyses import (analyze_pdcfa, analyze_gc_precise, analyze_gc_approx,
                       analyze_pdcfa_widened, analyze_finite)
from .metrics import compute_metrics, to_dot, to_json
from . import bench

ANALYSES = ("concrete", "plain", "plain-gc", "pdcfa", "pdcfa-gc",
            "pdcfa-gc-approx", "pdcfa-widened", "all")


def policy_for_k(k: int):
    if k <= 0:
        return Mono()
    if k == 1:
        return OneCFA()
    return KCFA(k)


def run_one(kind, e, policy, deadline=None, node_limit=None):
    if kind == "plain":
        return analyze_finite(e, policy, gc=False, deadline=deadline,
                              node_limit=node_limit)
    if kind == "plain-gc":
        return analyze_finite(e, policy, gc=True, deadline=deadline,
                              node_limit=node_limit)
    if kind == "pdcfa":
        return analyze_pdcfa(e, policy, deadline, node_limit)
    if kind == "pdcfa-gc":
        return analyze_gc_precise(e, policy, deadline, node_limit)
    if kind == "pdcfa-gc-approx":
        return analyze_gc_approx(e, policy, deadline, node_limit)
    if kind == "pdcfa-widened":
        return analyze_pdcfa_widened(e, policy, deadline)
    raise ValueError(kind)


def _summary_line(m):
    return (f"{m.program:>10}  {m.analysis:<16} k={m.k} "
            f"states={m.control_states:<7} edges={m.edges:<7} "
            f"singletons={m.singleton_vars}/{m.variables_total} "
            f"time={m.wall_time_ms:.1f}ms"
            + ("" if m.saturated else "  [timeout]"))


def _emit(text, out_path):
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _load_program(spec: str):
    p = Path(spec)
    if p.exists():
        return p.stem, parse_and_normalize(p.read_text())
    if spec in bench.BY_NAME:
        return spec, bench.load(spec)
    raise FileNotFoundError(spec)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pdcfa")
    sub = parser.add_subparsers(dest="cmd", required=True)
    runp = sub.add_parser("run", help="analyze one program")
    runp.add_argument("file", help="path to a .scm program, or a bundled "
                                   "benchmark name (e.g. fig1)")
    runp.add_argument("--analysis", choices=ANALYSES, default="pdcfa-gc")
    runp.add_argument("--k", type=int, default=0)
    runp.add_argument("--fuel", type=int, default=100_000,
                      help="step budget for --analysis concrete")
    runp.add_argument("--format", choices=("summary", "json", "dot"),
                      default="summary")
    runp.add_argument("--out", default=None)
    runp.add_argument("--timeout-secs", type=float, default=None)
    runp.add_argument("--dump-anf", action="store_true",
                      help="print the normalized program and exit")
    args = parser.parse_args(argv)

    try:
        name, e = _load_program(args.file)
    except FileNotFoundError as ex:
        print(f"pdcfa: no such program: {ex}", file=sys.stderr)
        return 1
    except (ParseError, UnboundVariable) as ex:
        print(f"pdcfa: {ex}", file=sys.stderr)
        return 1

    if args.dump_anf:
        _emit(print_anf(e), args.out)
        return 0

    deadline = (time.monotonic() + args.timeout_secs
                if args.timeout_secs else None)
    policy = policy_for_k(args.k)

    if args.analysis == "concrete":
        trace, outcome = concrete_run(e, fuel=args.fuel)
        kind, payload = outcome[0], outcome[1] if len(outcome) > 1 else None
        _emit(f"{name}: {kind} {payload if payload is not None else ''} "
              f"({len(trace)} configurations)".rstrip(), args.out)
        return 0 if kind == "halt" else 1

    kinds = (["plain", "plain-gc", "pdcfa", "pdcfa-gc", "pdcfa-gc-approx",
              "pdcfa-widened"] if args.analysis == "all"
             else [args.analysis])
    lines = []
    metrics = []
    last = None
    for kind in kinds:
        t0 = time.monotonic()
        r = run_one(kind, e, policy, deadline)
        wall = (time.monotonic() - t0) * 1000.0
        m = compute_metrics(name, r, args.k, wall)
        last = (r, m)
        metrics.append(m)
        lines.append(_summary_line(m))

    r, m = last
    if args.format == "dot":
        _emit(to_dot(r), args.out)
    elif args.format == "json":
        if args.analysis == "all":
            _emit("[\n" + ",\n".join(to_json(mm).rstrip()
                                     for mm in metrics) + "\n]\n", args.out)
        else:
            _emit(to_json(m).rstrip() + "\n" + to_json(r), args.out)
    else:
        _emit("\n".join(lines), args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
