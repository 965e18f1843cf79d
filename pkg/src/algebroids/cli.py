"""Command line: ``verify``, ``integrate`` and ``morphism``.

Exit codes: 0 all checks pass, 1 a verification failed, 2 usage or load error.
"""
from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from .semispray import admissibility_defect, integrate_semispray, write_trajectory_csv
from .specfile import SpecError, load_spec
from .verify import format_report, morphism_checks, run_checks

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _vector(text):
    try:
        return np.array([float(p) for p in text.split(",")] if text.strip() else [], dtype=float)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated vector: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="algebroids", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("verify", help="run every applicable identity check on a spec")
    v.add_argument("spec")
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--samples", type=_positive_int, default=64)
    v.add_argument("--tol-scale", type=float, default=1.0)

    i = sub.add_parser("integrate", help="integrate the semispray and check admissibility")
    i.add_argument("spec")
    i.add_argument("--start", type=_vector, required=True, help="comma-separated (x, u)")
    i.add_argument("--t0", type=float, default=0.0)
    i.add_argument("--t1", type=float, default=1.0)
    i.add_argument("--steps", type=_positive_int, default=1000)
    i.add_argument("--chart", default=None)
    i.add_argument("--out", default=None, help="CSV path (default: stdout, report on stderr)")

    mo = sub.add_parser("morphism", help="check the spec's morphism block")
    mo.add_argument("spec")
    mo.add_argument("--seed", type=int, default=None)
    mo.add_argument("--samples", type=_positive_int, default=64)
    return p


def _load(path):
    try:
        return load_spec(path)
    except (SpecError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None


def cmd_verify(args) -> int:
    spec = _load(args.spec)
    if spec is None:
        return EXIT_USAGE
    results = run_checks(spec, args.samples, args.seed, args.tol_scale)
    sys.stdout.write(format_report(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def cmd_morphism(args) -> int:
    spec = _load(args.spec)
    if spec is None:
        return EXIT_USAGE
    if spec.morphism is None:
        print(f"error: {args.spec} has no morphism block", file=sys.stderr)
        return EXIT_USAGE
    results = morphism_checks(spec, args.samples, args.seed)
    sys.stdout.write(format_report(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def _fmt(vec):
    return "(" + ",".join(f"{v:.17g}" for v in vec) + ")"


def cmd_integrate(args) -> int:
    spec = _load(args.spec)
    if spec is None:
        return EXIT_USAGE
    S = spec.semispray
    if S is None:
        print(f"error: {args.spec} has no semispray block", file=sys.stderr)
        return EXIT_USAGE
    B = spec.bundle
    m, k = B.base_dim, B.fibre_dim
    chart = args.chart or next(iter(S.G))
    if chart not in S.G:
        print(f"error: semispray not defined on chart {chart!r}", file=sys.stderr)
        return EXIT_USAGE
    if args.start.shape != (m + k,):
        print(f"error: --start needs {m + k} values (base then fibre coordinates), got {args.start.size}",
              file=sys.stderr)
        return EXIT_USAGE
    box = B.sample_domains[chart]
    if any(not lo <= xi <= hi for xi, (lo, hi) in zip(args.start[:m], box)):
        print(f"error: start point lies outside the domain of chart {chart!r}", file=sys.stderr)
        return EXIT_USAGE
    if not args.t1 > args.t0:
        print("error: need --t1 > --t0", file=sys.stderr)
        return EXIT_USAGE

    curve = integrate_semispray(S, args.start, (args.t0, args.t1), args.steps, chart)
    fine = integrate_semispray(S, args.start, (args.t0, args.t1), 2 * args.steps, chart)

    report = sys.stdout
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_trajectory_csv(curve, fh)
    else:
        write_trajectory_csv(curve, sys.stdout)
        report = sys.stderr
    if not curve.ok:
        print(f"INTEGRATION FAILED {curve.error}", file=report)
        return EXIT_FAIL
    coarse_d = admissibility_defect(B, curve).value if len(curve.times) >= 3 else math.nan
    fine_d = admissibility_defect(B, fine).value if fine.ok else math.nan
    ratio = coarse_d / fine_d if fine_d > 0 else math.inf
    order = math.log2(ratio) if 0 < ratio < math.inf else math.nan
    print(f"FINAL t={curve.times[-1]:.17g} state={_fmt(curve.states[-1])}", file=report)
    print(f"ADMISSIBILITY steps={args.steps} max_defect={coarse_d:.6e}", file=report)
    print(f"ADMISSIBILITY steps={2 * args.steps} max_defect={fine_d:.6e}", file=report)
    print(f"CONVERGENCE ratio={ratio:.4f} order={order:.3f}", file=report)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"verify": cmd_verify, "integrate": cmd_integrate, "morphism": cmd_morphism}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
