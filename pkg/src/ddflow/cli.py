"""Command-line entry point: ``ddflow run`` and ``ddflow bench``.

Exit codes: 0 success, 1 usage error, 2 unreadable or invalid input.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .cpg import CpgError, load_cpg
from .engine import DEFAULT_MAX_CALL_DEPTH, QueryError, TaintQuery, run_query
from .frontend import compile_program
from .matchers import MatcherError, resolve_all
from .minilang import ParseError
from .semantics import SemanticsError, load_registry

log = logging.getLogger("ddflow")

EXIT_USAGE = 1
EXIT_INPUT = 2


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ddflow", description="Taint tracking over explicit data dependencies.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="answer a taint query")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--mini", nargs="+", metavar="FILE", help="mini-language sources")
    src.add_argument("--cpg", metavar="FILE", help="serialized graph (JSON)")
    run.add_argument("--sources", action="append", required=True, metavar="MATCHER")
    run.add_argument("--sinks", action="append", required=True, metavar="MATCHER")
    run.add_argument("--semantics", action="append", default=[], metavar="FILE")
    run.add_argument("--semantics-regex", action="store_true", help="treat rule names as regexes")
    run.add_argument("--no-operators", action="store_true", help="drop built-in operator rules")
    run.add_argument("--depth", type=_positive, default=DEFAULT_MAX_CALL_DEPTH, help="max call depth")
    run.add_argument("--jobs", type=_positive, default=os.cpu_count() or 1)
    run.add_argument("--format", choices=("text", "json"), default="text")
    run.add_argument("--no-timing", action="store_true", help="omit elapsed time for reproducible output")

    bench = sub.add_parser("bench", help="score a labelled corpus")
    bench.add_argument("manifest", help="corpus manifest (JSON)")
    bench.add_argument("--iterations", type=_positive, default=10)
    bench.add_argument("--sweep-k", action="store_true", help="report metrics for depth 1..8")
    bench.add_argument("--parallel-cases", type=_positive, default=1)
    bench.add_argument("--mode", choices=("curated", "default"), default="curated",
                       help="'default' ignores per-case semantics files")
    bench.add_argument("--format", choices=("text", "json"), default="text")
    return parser


def load_graph(args):
    if args.cpg:
        try:
            data = Path(args.cpg).read_bytes()
        except OSError as exc:
            raise InputError(f"cannot read {args.cpg}: {exc.strerror}") from None
        try:
            return load_cpg(data)
        except CpgError as exc:
            raise InputError(f"{args.cpg}: {exc}") from None
    sources = []
    for path in args.mini:
        try:
            sources.append(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return compile_program("\n".join(sources))
    except ParseError as exc:
        raise InputError("; ".join(f"{d.line}:{d.column}: {d.message}" for d in exc.diagnostics)) from None


def cmd_run(args) -> int:
    cpg = load_graph(args)
    try:
        registry = load_registry(args.semantics, include_operators=not args.no_operators,
                                 regex=args.semantics_regex)
    except OSError as exc:
        raise InputError(f"cannot read semantics: {exc}") from None
    except SemanticsError as exc:
        raise InputError(f"semantics: {exc}") from None
    try:
        sources = resolve_all(cpg, args.sources)
        sinks = resolve_all(cpg, args.sinks)
    except MatcherError as exc:
        raise UsageError(str(exc)) from None
    for label, nodes in (("source", sources), ("sink", sinks)):
        if not nodes:
            print(f"warning: {label} matcher resolved to 0 nodes", file=sys.stderr)
    report = run_query(cpg, TaintQuery(sources, sinks, registry, args.depth), jobs=args.jobs,
                       timing=not args.no_timing)
    sys.stdout.write(report.to_json() + "\n" if args.format == "json" else report.to_text())
    return 0


def cmd_bench(args) -> int:
    from .bench import BenchError, format_bench, run_bench

    try:
        result = run_bench(args.manifest, iterations=args.iterations, sweep_k=args.sweep_k,
                           parallel_cases=args.parallel_cases, mode=args.mode)
    except BenchError as exc:
        raise InputError(str(exc)) from None
    sys.stdout.write(format_bench(result, args.format))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return cmd_run(args) if args.command == "run" else cmd_bench(args)
    except UsageError as exc:
        print(f"ddflow: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, QueryError) as exc:
        print(f"ddflow: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
