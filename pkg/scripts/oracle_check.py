"""Differential check of the solver against the exhaustive reference walk.

    python3 scripts/oracle_check.py [--count 500] [--start 0] [--depth 8]
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from ddflow import SemanticsRegistry, TaintQuery, compile_program, parse_semantics, resolve_matcher, run_query  # noqa: E402
from oracle import oracle_flows  # noqa: E402
from programs import SINK, SOURCE, random_case  # noqa: E402


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--count", type=int, default=500)
    ap.add_argument("--start", type=int, default=0)
    ap.add_argument("--depth", type=int, default=8)
    ap.add_argument("--show", action="store_true", help="print each failing program")
    args = ap.parse_args()
    t0 = time.perf_counter()
    bad = flows = 0
    for seed in range(args.start, args.start + args.count):
        case = random_case(seed)
        cpg = compile_program(case.source)
        reg = SemanticsRegistry(parse_semantics(case.semantics))
        src, snk = resolve_matcher(cpg, SOURCE), resolve_matcher(cpg, SINK)
        got = run_query(cpg, TaintQuery(src, snk, reg, args.depth)).paths()
        want = oracle_flows(cpg, src, snk, reg, args.depth)
        flows += len(got)
        if got != want:
            bad += 1
            print(f"seed {seed}: solver {len(got)} flows, oracle {len(want)}")
            if args.show:
                print(case.source, case.semantics, sep="\n")
    print(f"{args.count - bad}/{args.count} agree, {flows} flows, {time.perf_counter() - t0:.1f}s")
    sys.exit(1 if bad else 0)


if __name__ == "__main__":
    main()
