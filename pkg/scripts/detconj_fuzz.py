"""Seeded determinant fuzzing over finite groups and finite quotients of Z^k.

Exits with status 1 and prints the offending samples if any determinant
falls below 1.
"""

import argparse
import sys
from pathlib import Path

from l2approx.harness import ExperimentConfig, detconj_fuzz, dump_report


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--samples", type=int, default=1000)
    ap.add_argument("--grams", type=int, default=1000)
    ap.add_argument("--out", default="results/fuzz")
    args = ap.parse_args()
    cfg = ExperimentConfig(command="detconj-fuzz", seed=args.seed, samples=args.samples, grams=args.grams)
    rep = detconj_fuzz(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"fuzz_seed{args.seed}.json").write_text(dump_report(rep.to_json(), {"seed": args.seed}))
    print(f"samples {rep.samples}  min det {rep.min_det:.12f}  grams {rep.gram_samples}  "
          f"min gram product {rep.min_gram:.6f}  {rep.seconds:.1f} s")
    if not rep.ok:
        print("VIOLATIONS:", rep.violations + rep.gram_violations, file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
