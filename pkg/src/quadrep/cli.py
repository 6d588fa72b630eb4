"""Command-line entry point ``quadrep``."""

from __future__ import annotations

import argparse
import json
import sys
from contextlib import contextmanager

from . import harness
from .counting import WEIGHT_KINDS, count
from .errors import QuadrepError
from .expsum import ExpSumQuery, expsum, expsum_direct
from .oscillatory import singular_integral_char, singular_integral_gaussian, volume_density_oracle
from .quadform import SmoothingParams, diagonalize, load_box, load_form
from .singseries import singular_series, singular_series_euler


@contextmanager
def _open_output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        try:
            with open(path, "w") as fh:
                yield fh
        except OSError as exc:
            raise QuadrepError(f"cannot write {path}: {exc}") from exc


def _write_json(obj, path):
    with _open_output(path) as fh:
        fh.write(json.dumps(obj) + "\n")


def cmd_converge(args) -> int:
    cfg = harness.ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    out = args.output if args.output is not None else (
        str(cfg.path(cfg.output)) if cfg.output else None)
    with _open_output(out) as fh:
        writer = harness.StreamWriter(fh, args.format)
        rows = harness.run_convergence(cfg, sink=writer, threads=args.threads)
    bad = [r for r in rows if r.error]
    for r in bad:
        print(f"P={r.P}: {r.error}", file=sys.stderr)
    return 1 if bad else 0


def _params(args, box, diag, n):
    if args.x0 is not None:
        x0 = tuple(args.x0)
    elif box is not None:
        x0 = tuple(float(v) for v in box.centre(diag))
    else:
        x0 = (0.0,) * n
    return SmoothingParams(args.P, args.A, x0)


def cmd_count(args) -> int:
    form = load_form(args.form)
    box = load_box(args.box) if args.box else None
    diag = diagonalize(form)
    res = count(args.N, args.weight, form, diag, _params(args, box, diag, form.n), box,
                tol=args.tol)
    _write_json(res.to_json(), args.output)
    return 0


def cmd_series(args) -> int:
    form = load_form(args.form)
    est = singular_series(args.N, args.Qmax, form)
    if args.euler:
        est.euler_value = singular_series_euler(args.N, args.euler[0], args.euler[1], form)
    _write_json(est.to_json(), args.output)
    return 0


def cmd_integral(args) -> int:
    form = load_form(args.form)
    diag = diagonalize(form)
    box = load_box(args.box) if args.box else None
    if args.kind != "gaussian" and box is None:
        raise QuadrepError(f"--kind {args.kind} needs --box")
    if args.kind == "char":
        est = singular_integral_char(args.N, args.P, [(1, 1.0)], box, form, diag, rtol=args.rtol)
    elif args.kind == "gaussian":
        est = singular_integral_gaussian(args.N, _params(args, box, diag, form.n), diag, rtol=args.rtol)
    else:
        est = volume_density_oracle(args.N, args.P, box, form, diag, samples=args.samples,
                                    seed=args.seed or 0)
    _write_json(est.to_json(), args.output)
    return 0


def cmd_expsum(args) -> int:
    form = load_form(args.form)
    b = tuple(args.b) if args.b else (0,) * form.n
    query = ExpSumQuery(args.q, args.u, b, args.N)
    if args.method == "direct":
        val = expsum_direct(query, form)
    else:
        val = expsum(query, form, fast=args.method == "fast")
    _write_json(val.to_json(), args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", "-o", help="output file (default stdout)")
    common.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=1)

    p = argparse.ArgumentParser(prog="quadrep",
                                description="Representation counts of quadratic forms in boxes.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("converge", parents=[common], help="run a convergence sweep")
    c.add_argument("--config", required=True)
    c.set_defaults(func=cmd_converge)

    c = sub.add_parser("count", parents=[common], help="weighted solution count")
    c.add_argument("--N", type=int, required=True)
    c.add_argument("--P", type=float, required=True)
    c.add_argument("--A", type=float, default=1.0)
    c.add_argument("--weight", choices=WEIGHT_KINDS, default="char")
    c.add_argument("--form", required=True)
    c.add_argument("--box")
    c.add_argument("--x0", type=float, nargs="+")
    c.add_argument("--tol", type=float, default=1e-9)
    c.set_defaults(func=cmd_count)

    c = sub.add_parser("series", parents=[common], help="truncated singular series")
    c.add_argument("--N", type=int, required=True)
    c.add_argument("--Qmax", type=int, default=400)
    c.add_argument("--euler", type=int, nargs=2, metavar=("PMAX", "KMAX"))
    c.add_argument("--form", required=True)
    c.set_defaults(func=cmd_series)

    c = sub.add_parser("integral", parents=[common], help="singular integral")
    c.add_argument("--N", type=float, required=True)
    c.add_argument("--P", type=float, required=True)
    c.add_argument("--A", type=float, default=1.0)
    c.add_argument("--kind", choices=("char", "gaussian", "oracle"), default="char")
    c.add_argument("--form", required=True)
    c.add_argument("--box")
    c.add_argument("--x0", type=float, nargs="+")
    c.add_argument("--rtol", type=float, default=1e-6)
    c.add_argument("--samples", type=int, default=10**6)
    c.set_defaults(func=cmd_integral)

    c = sub.add_parser("expsum", parents=[common], help="complete exponential sum S_u(q, b, N)")
    c.add_argument("--q", type=int, required=True)
    c.add_argument("--u", type=int, default=0)
    c.add_argument("--b", type=int, nargs="+")
    c.add_argument("--N", type=int, required=True)
    c.add_argument("--form", required=True)
    c.add_argument("--method", choices=("direct", "multiplicative", "fast"), default="multiplicative")
    c.set_defaults(func=cmd_expsum)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except QuadrepError as exc:
        print(f"quadrep: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
