"""Print the dyadic counterexample table: det(pr2 o p_k) against 1/k."""

import argparse

from l2approx import counterexample as cx


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kmax", type=int, default=8)
    args = ap.parse_args()
    print("k\teps^2 digits\tdet\t1/k\texact log\tdim(A_k)")
    for k in range(1, args.kmax + 1):
        r = cx.det_pr2_pk(k)
        print(f"{k}\t{len(str(r.eps_sq.numerator))}\t{r.det:.15g}\t{1 / k:.15g}\t{r.log_det}\t{cx.dim_Ak(k)}")
    print("\nengine cross-check (small k only; larger k fall under the zero clamp)")
    for k in (1, 2, 3):
        print(f"{k}\t{cx.det_via_engine(k):.15g}")


if __name__ == "__main__":
    main()
