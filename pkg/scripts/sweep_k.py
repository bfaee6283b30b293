"""Rerun the bundled corpus for call depths 1..8 and print the metrics per depth.

    python3 scripts/sweep_k.py [manifest] [--mode curated|default]
"""

import argparse
from pathlib import Path

from ddflow.bench import SWEEP_DEPTHS, load_manifest, run_corpus

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("manifest", nargs="?", default=str(ROOT / "fixtures" / "corpus" / "manifest.json"))
    ap.add_argument("--mode", choices=("curated", "default"), default="curated")
    args = ap.parse_args()
    cases = load_manifest(args.manifest)
    print("  k    TP   TN   FP   FN     F1      J")
    for k in SWEEP_DEPTHS:
        r = run_corpus(cases, depth=k, mode=args.mode)
        m, d = r.matrix, r.metrics.display()
        print(f"{k:>3}  {m.tp:>4} {m.tn:>4} {m.fp:>4} {m.fn:>4}  {d['f1']:>5}  {d['j_index']:>5}")


if __name__ == "__main__":
    main()
