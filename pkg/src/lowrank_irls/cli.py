"""Command-line entry point ``lowrank-irls``.

Exit status: 0 on success, 1 on a runtime or numerical failure, 2 on a
usage error (argparse exits with 2 on its own).
"""

import argparse
import logging
import sys

import numpy as np

from . import analysis, bench, image, matcore, measure, pgm, selfcheck
from .exceptions import FormatError, InvalidArgumentError, LowRankError
from .solver import SolverConfig, solve

logger = logging.getLogger("lowrank_irls")

DESK_SIZE, LARGE_SIZE = 100, 500


class UsageError(Exception):
    pass


def _solver_flags(p, rank_required=True):
    p.add_argument("-K", "--rank", type=int, required=rank_required, help="rank parameter K")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--eps-tol", type=float, default=1e-6, help="relative eps change counted as a stall")
    p.add_argument("--eps-stall", type=int, default=50, help="stalled iterations tolerated before stopping")


def _config(args, K):
    return SolverConfig(K=K, gamma=args.gamma, max_iter=args.max_iter,
                        eps_stall_tol=args.eps_tol, eps_stall_len=args.eps_stall)


def _read_text(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _emit(data, out):
    """Write ``data`` (str or bytes) to ``out`` or to stdout."""
    if out is None:
        if isinstance(data, bytes):
            sys.stdout.buffer.write(data)
        else:
            sys.stdout.write(data)
        return
    mode = "wb" if isinstance(data, bytes) else "w"
    kw = {} if isinstance(data, bytes) else {"encoding": "utf-8", "newline": "\n"}
    with open(out, mode, **kw) as fh:
        fh.write(data)


def cmd_solve(args):
    op, order = measure.read_mask(_read_text(args.mask))
    tokens = _read_text(args.values).split()
    try:
        values = np.array([float(t) for t in tokens])
    except ValueError as exc:
        raise FormatError("values file must hold one real per line") from exc
    if values.size != op.m:
        raise FormatError(f"values file has {values.size} entries, mask has {op.m}")
    report = solve(op, values[order], _config(args, args.rank))
    logger.info("stop=%s iterations=%d eps=%.3g", report.stop_reason, report.iterations, report.final_eps)
    _emit(matcore.write_matrix(report.X_final), args.out)
    return 0


def cmd_synth(args):
    size = LARGE_SIZE if args.paper_scale else DESK_SIZE
    n = args.n or size
    p = args.p or size
    k = args.k if args.k is not None else args.rank
    specs = [
        bench.TrialSpec(n, p, k, kappa, args.noise, args.seed, _config(args, args.rank))
        for kappa in args.fraction
    ]
    rows, _ = bench.run_grid(specs, args.trials)
    _emit(bench.rows_to_csv(rows), args.out)
    return 0


def cmd_image(args):
    with open(args.input, "rb") as fh:
        img = pgm.read_pgm(fh.read())
    if args.mask is not None:
        mask, _ = measure.read_mask(_read_text(args.mask))
    elif args.fraction is not None:
        mask = image.sample_pixels(img, args.fraction, args.seed)
    else:
        raise UsageError("image needs --fraction or --mask")
    X, report = image.reconstruct(img, mask, _config(args, args.rank))
    out = pgm.GrayImage(image.to_pixels(X))
    if report is not None:
        logger.info("stop=%s iterations=%d rel_error=%.4f", report.stop_reason, report.iterations,
                    bench.rel_error(X, img.pixels.astype(float)))
    _emit(pgm.write_pgm(out), args.out)
    return 0


def cmd_theory(args):
    rep = analysis.guarantee_report(analysis.GuaranteeInputs(args.delta3k, args.delta4k, args.K, args.k))
    thr = "n/a" if rep.eta_threshold is None else f"{rep.eta_threshold:.12g}"
    cond = "n/a" if rep.convergence_condition is None else str(rep.convergence_condition).lower()
    lam = "n/a" if rep.Lambda is None else f"{rep.Lambda:.12g}"
    lines = ["quantity,value", f"eta,{rep.eta:.12g}", f"eta_threshold,{thr}",
             f"convergence_condition,{cond}", f"Lambda,{lam}"]
    if rep.note:
        lines.append(f"note,\"{rep.note}\"")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_check(args):
    results = selfcheck.run_all(args.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="lowrank-irls", description="Low-rank matrix recovery by IRLS.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="complete a matrix from a mask file and a values file")
    p.add_argument("mask", help="mask file: 'n p' header, then one 'row col' pair per line")
    p.add_argument("values", help="one observed value per mask line, same order")
    _solver_flags(p)
    p.add_argument("--out", help="output matrix file (default stdout)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("synth", help="planted-matrix trial grid, CSV output")
    _solver_flags(p)
    p.add_argument("--k", type=int, help="planted rank (default: --rank)")
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=int)
    p.add_argument("--fraction", type=float, nargs="+", default=[0.5], help="one or more sampling fractions")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--paper-scale", action="store_true", help="use n = p = 500")
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("image", help="complete a PGM image from a subset of its pixels")
    p.add_argument("input")
    _solver_flags(p)
    p.add_argument("--fraction", type=float)
    p.add_argument("--mask", help="mask file instead of random sampling")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_image)

    p = sub.add_parser("theory", help="eta, convergence condition and Lambda from RIP constants")
    p.add_argument("--delta3k", type=float, required=True)
    p.add_argument("--delta4k", type=float, required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("check", help="run the built-in oracle suite")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, InvalidArgumentError) as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except (LowRankError, OSError) as exc:
        print(f"{parser.prog}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
