"""Quotient-chain determinants of Laurent polynomials against the root oracle.

Writes one TSV per polynomial (n, det, oracle, error) into --out.
"""

import argparse
from pathlib import Path

from l2approx.approx import doubling
from l2approx.harness import mahler

POLYS = {
    "t-2": [1, -2],
    "golden": [1, -1, -1],
    "lehmer": [1, 1, 0, -1, -1, -1, -1, -1, 0, 1, 1],
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nmax", type=int, default=8192)
    ap.add_argument("--out", default="results/mahler")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, coeffs in POLYS.items():
        rep = mahler(coeffs, doubling(2, args.nmax))
        lines = ["n\tdet\toracle\terror"]
        lines += [f"{n}\t{d:.17g}\t{rep.oracle:.17g}\t{abs(d - rep.oracle):.3e}"
                  for n, d in zip(rep.stages, rep.dets)]
        (out / f"{name}.tsv").write_text("\n".join(lines) + "\n")
        print(f"{name:8s} oracle {rep.oracle:.9f}  final {rep.dets[-1]:.9f}  error {rep.final_error:.2e}")


if __name__ == "__main__":
    main()
