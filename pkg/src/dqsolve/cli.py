"""Command-line frontend.

Reads DQDIMACS from a file or stdin, decides the formula, prints the
verdict in QBF-competition style and exits with the matching code:

    s cnf 1    true      exit 10
    s cnf 0    false     exit 20
    s cnf -1   unknown   exit 0

Usage or parse errors exit 1.  Diagnostics go to stderr; the verdict line is
always the last line on stdout.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import dqdimacs
from .engine import Engine, EngineOptions, FALSE, TRUE
from .forks import is_multi_linear
from .lattice import build_structure, format_structure
from .oracle import ExpansionBoundExceeded, oracle_solve


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dqsolve",
        description="Decide a DQBF given in DQDIMACS format.",
    )
    p.add_argument("input", nargs="?", default="-", help="input file, or - for stdin")
    p.add_argument(
        "--oracle",
        action="store_true",
        help="decide by brute-force universal expansion instead of the engine",
    )
    p.add_argument(
        "--no-strong-fex",
        action="store_true",
        help="disable strong fork extension; dependency cycles yield unknown",
    )
    p.add_argument(
        "--max-conflicts",
        type=int,
        metavar="N",
        help="give up with unknown after N conflicts (default: unlimited)",
    )
    p.add_argument("--seed", type=int, default=0, metavar="N", help="decision seed")
    p.add_argument("--stats", action="store_true", help="print solver statistics")
    p.add_argument(
        "--print-structure",
        action="store_true",
        help="dump the dependency lattice decomposition to stderr",
    )
    p.add_argument(
        "--check-multilinear",
        action="store_true",
        help="print whether the prefix is multi-linear and exit",
    )
    p.add_argument(
        "--dump-abstractions",
        metavar="DIR",
        help="write each node's SAT instance as DIMACS into DIR",
    )
    p.add_argument("--verbosity", type=int, default=0, metavar="LEVEL")
    return p


ENGINE_ONLY_FLAGS = (
    ("no_strong_fex", "--no-strong-fex"),
    ("max_conflicts", "--max-conflicts"),
    ("print_structure", "--print-structure"),
    ("dump_abstractions", "--dump-abstractions"),
)


def run(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.input == "-":
            text = sys.stdin.buffer.read()
        else:
            with open(args.input, "rb") as fh:
                text = fh.read()
    except OSError as e:
        print(f"cannot read input: {e}", file=sys.stderr)
        return 1

    try:
        formula = dqdimacs.parse(text)
    except dqdimacs.ParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return 1
    if args.verbosity >= 1:
        for w in formula.warnings:
            print(f"warning: {w}", file=sys.stderr)

    if args.check_multilinear:
        verdict = "multi-linear" if is_multi_linear(formula.prefix) else "not multi-linear"
        print(verdict)
        return 0

    if args.print_structure:
        print(format_structure(build_structure(formula)), file=sys.stderr)

    if args.oracle:
        for attr, flag in ENGINE_ONLY_FLAGS:
            if getattr(args, attr):
                print(f"warning: {flag} is ignored with --oracle", file=sys.stderr)
        try:
            value = oracle_solve(formula)
        except ExpansionBoundExceeded as e:
            print(f"oracle error: {e}", file=sys.stderr)
            return 1
        return _emit(TRUE if value else FALSE, "", {}, args)

    opts = EngineOptions(
        strong_fork_extension=not args.no_strong_fex,
        max_conflicts=args.max_conflicts,
        seed=args.seed,
    )
    engine = Engine(formula, opts)
    result = engine.solve()
    if args.dump_abstractions:
        _dump_abstractions(engine, args.dump_abstractions)
    return _emit(result.verdict, result.reason, result.stats, args)


def _emit(verdict: str, reason: str, stats: dict, args) -> int:
    if args.stats:
        for name in sorted(stats):
            print(f"c stat {name} {stats[name]}")
    if verdict == TRUE:
        print("s cnf 1")
        return 10
    if verdict == FALSE:
        print("s cnf 0")
        return 20
    print(f"c unknown: {reason}")
    print("s cnf -1")
    return 0


def _dump_abstractions(engine: Engine, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    for key, abs_ in engine.abstractions.items():
        kind = "exists" if key[0] == "e" else "forall"
        tag = "_".join(str(v) for v in sorted(key[1])) or "empty"
        path = os.path.join(directory, f"{kind}_{tag}.cnf")
        with open(path, "w") as fh:
            fh.write(f"c node {abs_.node.name()}\n")
            for v, sv in sorted(abs_.var_map.items()):
                fh.write(f"c var {v} -> {sv}\n")
            for cid, sv in sorted(abs_.s_var.items()):
                fh.write(f"c s[{cid}] -> {sv}\n")
            for cid, av in sorted(abs_.a_var.items()):
                fh.write(f"c a[{cid}] -> {av}\n")
            fh.write(abs_.solver.dump_dimacs())


def main() -> None:
    sys.exit(run())
