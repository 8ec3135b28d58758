"""Command line entry point: ``l2approx <command> [flags]``.

Every command prints a report (JSON or TSV) and exits with status 1 when an
invariant it checks is violated.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness
from .approx import FolnerBoxes, QuotientChain, RegularRep, doubling, run_approximation
from .grouprings import GroupRingMatrix


def _stages(text: str | None, default: tuple[int, ...]) -> tuple[int, ...]:
    if not text:
        return default
    if ":" in text:
        a, b = (int(x) for x in text.split(":"))
        return doubling(a, b)
    return tuple(int(x) for x in text.split(","))


def _coeffs(text: str) -> list[int]:
    return [int(x) for x in text.split(",")]


def _load_matrix(args) -> GroupRingMatrix:
    if args.matrix:
        return GroupRingMatrix.loads(Path(args.matrix).read_text())
    if args.poly:
        return harness.polynomial_matrix(_coeffs(args.poly))
    raise SystemExit("error: one of --matrix FILE or --poly COEFFS is required")


def _tsv(rows: list[dict]) -> str:
    if not rows:
        return ""
    keys = list(rows[0])
    lines = ["\t".join(keys)]
    for r in rows:
        lines.append("\t".join(f"{r[k]:.17g}" if isinstance(r[k], float) else str(r[k]) for k in keys))
    return "\n".join(lines) + "\n"


# each runner returns (payload, tsv table, ok)


def _approx(args, scheme_name: str):
    A = _load_matrix(args)
    if scheme_name == "regular":
        scheme = RegularRep()
    elif scheme_name == "quotient":
        scheme = QuotientChain(_stages(args.stages, doubling(1, 256)))
    elif scheme_name == "folner":
        scheme = FolnerBoxes(_stages(args.stages, doubling(1, 256)))
    else:
        raise SystemExit(f"error: unknown scheme {scheme_name}")
    rep = run_approximation(A, scheme, M=args.moments)
    v = rep.verdicts
    ok = bool(v["norm_bound_ok"] and v["moments_exact"] and v["det_ge_1"])
    return rep.to_json(), rep.to_tsv(), ok


def _detconj(args, cfg):
    rep = harness.detconj_fuzz(cfg)
    if rep.violations or rep.gram_violations:
        print(f"DETERMINANT BOUND VIOLATED: {len(rep.violations)} samples, "
              f"{len(rep.gram_violations)} Grams", file=sys.stderr)
    return rep.to_json(), _tsv(rep.records), rep.ok


def _mahler(args, cfg):
    polys = [_coeffs(p) for p in (args.poly or "1,-2").split(";")]
    out, rows, ok = [], [], True
    for c in polys:
        rep = harness.mahler(c, _stages(args.stages, doubling(2, 8192)), M=args.moments)
        good = rep.all_ge_1 and rep.final_error <= args.tol
        ok &= good
        out.append(dict(rep.to_json(), ok=good))
        rows += [{"poly": ",".join(map(str, c)), "n": n, "det": d, "oracle": rep.oracle}
                 for n, d in zip(rep.stages, rep.dets)]
    return {"polynomials": out}, _tsv(rows), ok


def _torsion(args, cfg):
    rep = harness.torsion_demo(seed=cfg.seed, tol=args.tol)
    return rep, _tsv(rep["examples"]), rep["ok"]


def _counterexample(args, cfg):
    rep = harness.counterexample_table(kmax=args.kmax, seed=cfg.seed)
    return rep, _tsv(rep["rows"]), rep["ok"]


def _bernoulli(args, cfg):
    rep = harness.bernoulli_suite(cfg)
    return rep, _tsv(rep["traces"]), rep["ok"]


def _transport(args, cfg):
    rep = harness.transport_suite(cfg, tol=args.tol)
    row = {k: v for k, v in rep.to_json().items() if k != "violations"}
    return rep.to_json(), _tsv([row]), rep.ok


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="l2approx", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--stages", help="comma list, or a:b for doubling from a to b")
    common.add_argument("--moments", type=int, default=6)
    common.add_argument("--tol", type=float, default=1e-9)
    common.add_argument("--out", help="directory for <command>.json and <command>.tsv")
    common.add_argument("--format", choices=("json", "tsv"), default="json")
    common.add_argument("--matrix", help="JSON group-ring matrix file")
    common.add_argument("--poly", help="integer coefficients, top degree first; ';' separates several")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("detconj-fuzz", parents=[common]).add_argument("--samples", type=int, default=1000)
    sub.add_parser("mahler", parents=[common]).set_defaults(tol=1e-3)
    sub.add_parser("folner", parents=[common])
    sub.add_parser("quotient", parents=[common])
    sub.add_parser("approx", parents=[common]).add_argument(
        "--scheme", choices=("regular", "quotient", "folner"), default="quotient")
    sub.add_parser("torsion-demo", parents=[common])
    sub.add_parser("counterexample", parents=[common]).add_argument("--kmax", type=int, default=8)
    sub.add_parser("bernoulli-check", parents=[common])
    sub.add_parser("transport-suite", parents=[common]).add_argument("--samples", type=int, default=100)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = harness.ExperimentConfig(command=args.command, seed=args.seed,
                                   samples=getattr(args, "samples", 1000), moments=args.moments,
                                   out=args.out, fmt=args.format)
    runners = {
        "detconj-fuzz": _detconj, "mahler": _mahler, "torsion-demo": _torsion,
        "counterexample": _counterexample, "bernoulli-check": _bernoulli, "transport-suite": _transport,
    }
    if args.command in ("folner", "quotient"):
        payload, table, ok = _approx(args, args.command)
    elif args.command == "approx":
        payload, table, ok = _approx(args, args.scheme)
    else:
        payload, table, ok = runners[args.command](args, cfg)
    payload = dict(payload, ok=bool(ok))
    text = harness.dump_report(payload, {"command": args.command, "seed": args.seed})
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{args.command}.json").write_text(text + "\n")
        (out / f"{args.command}.tsv").write_text(table)
    sys.stdout.write(text + "\n" if args.format == "json" else table)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
