"""Command-line surface: gen-transform, sketch, estimate, bench-variance,
bench-time, oracle-check.

Exit codes: 0 ok, 1 usage or invalid inputs, 2 incompatible sketch pair,
3 infeasible oracle instance.  The environment variable DPJL_SEED, when set,
overrides any --seed flag.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .errors import DpjlError, GaussianNeedsDelta, IncompatibleSketches, TooManyConfigs
from .estimators import ESTIMATE_CSV_HEADER, estimate_sqdist
from .harness import bench_time, bench_variance, write_bench_csv, write_timing_csv
from .oracle import enumerate_sjlt_moments
from .privacy import (
    NoiseSpec,
    PrivacyParams,
    calibrate,
    calibrate_gaussian,
    load_sketch,
    privatize,
    privatize_input_fjlt,
    save_sketch,
)
from .rng import Rng
from .transforms import (
    FjltTransform,
    IidGaussianTransform,
    SjltTransform,
    column_sensitivity,
    load_transform,
    params_from_accuracy,
    save_transform,
)

__all__ = ["main"]

DEFAULT_ORACLE_FIXTURES = [
    (2, 2, 1, [1.0, 1.0]),
    (3, 3, 1, [1.0, 2.0, 3.0]),
    (2, 4, 2, [1.0, 0.5]),
    (4, 4, 2, [0.5, 1.0, -1.0, 2.0]),
    (5, 4, 1, [1.0, -1.0, 2.0, 0.0, 3.0]),
    (2, 6, 3, [1.5, -2.0]),
]


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; the contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _resolve_seed(seed: int) -> int:
    env = os.environ.get("DPJL_SEED")
    if env is not None:
        return int(env)
    return seed


def _read_vector(path: str) -> np.ndarray:
    """One decimal per line, or a JSON array; auto-detected."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read().strip()
    if not text:
        raise DpjlError(f"empty input vector file {path}")
    if text.startswith("["):
        values = json.loads(text)
    else:
        values = [float(line) for line in text.splitlines() if line.strip()]
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1 or not np.isfinite(x).all():
        raise DpjlError(f"input vector in {path} must be a finite 1-D sequence")
    return x


def _cmd_gen_transform(args) -> int:
    seed = _resolve_seed(args.seed)
    if args.type == "sjlt":
        if args.k is not None or args.s is not None:
            if args.k is None or args.s is None:
                raise DpjlError("--k and --s must be given together")
            t = SjltTransform(d=args.dim, k=args.k, s=args.s, seed=seed)
        else:
            p = params_from_accuracy(args.alpha, args.beta, args.dim, c_k=args.c_k, c_s=args.c_s)
            t = SjltTransform(d=p.d, k=p.k, s=p.s, seed=seed)
        derived = f"k={t.k} s={t.s}"
    elif args.type == "fjlt":
        k = args.k if args.k is not None else _derived_k(args)
        t = FjltTransform.create(args.alpha, args.beta, args.dim, k, c_q=args.c_q, seed=seed)
        derived = f"k={t.k} q={t.q!r}"
    elif args.type == "iid":
        k = args.k if args.k is not None else _derived_k(args)
        t = IidGaussianTransform.create(d=args.dim, k=k, seed=seed)
        derived = f"k={t.k}"
    else:  # pragma: no cover - argparse restricts choices
        raise DpjlError(f"unknown transform type {args.type}")
    save_transform(t, args.out)
    d1 = column_sensitivity(t, 1)
    d2 = column_sensitivity(t, 2)
    print(f"type={args.type} d={args.dim} {derived} delta1={d1!r} delta2={d2!r}")
    print(f"wrote {args.out}")
    return 0


def _derived_k(args) -> int:
    if not (0 < args.alpha < 0.5) or not (0 < args.beta < 0.5):
        raise DpjlError("alpha and beta must lie in (0, 1/2)")
    return math.ceil(args.c_k * math.log(1.0 / args.beta) / args.alpha**2)


def _cmd_sketch(args) -> int:
    seed = _resolve_seed(args.seed)
    transform = load_transform(args.transform)
    x = _read_vector(args.input)
    pp = PrivacyParams(epsilon=args.epsilon, delta=args.delta)
    rng = Rng(seed).substream("sketch-noise")
    if args.site == "input":
        if not isinstance(transform, FjltTransform):
            raise DpjlError("--site input requires an fjlt transform")
        if args.debug_zero_noise:
            spec = NoiseSpec("gaussian", 0.0)
        else:
            if pp.delta == 0:
                raise GaussianNeedsDelta("input perturbation is Gaussian and needs --delta > 0")
            spec = calibrate_gaussian(1.0, pp.epsilon, pp.delta)
        sketch = privatize_input_fjlt(transform, x, spec, rng)
    else:
        mechanism = None if args.mechanism == "auto" else args.mechanism
        spec = calibrate(transform, pp, mechanism=mechanism)
        if args.debug_zero_noise:
            spec = NoiseSpec(spec.kind, 0.0)
        sketch = privatize(transform, x, spec, rng)
    if args.debug_zero_noise:
        print("warning: --debug-zero-noise produces a NON-PRIVATE sketch", file=sys.stderr)
    save_sketch(sketch, args.out)
    pure = " (pure DP)" if spec.kind == "laplace" else ""
    print(
        f"mechanism={spec.kind} scale={spec.scale!r} site={sketch.site} "
        f"epsilon={spec.epsilon!r} delta={spec.delta!r}{pure}",
        file=sys.stderr,
    )
    print(f"wrote {args.out}")
    return 0


def _cmd_estimate(args) -> int:
    a = load_sketch(args.a)
    b = load_sketch(args.b)
    report = estimate_sqdist(a, b)
    if args.header:
        print(ESTIMATE_CSV_HEADER)
    print(report.csv_row())
    return 0


def _cmd_bench_variance(args) -> int:
    seed = _resolve_seed(args.seed)
    schemes = [tok.strip() for tok in args.schemes.split(",") if tok.strip()]
    delta_grid = [float(tok) for tok in args.delta_grid.split(",") if tok.strip()]
    rows, analysis = bench_variance(
        schemes=schemes,
        dist_sq=args.dist_sq,
        delta_grid=delta_grid,
        epsilon=args.epsilon,
        trials=args.trials,
        seed=seed,
        d=args.dim,
        k=args.k,
        s=args.s,
        q=args.q,
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        write_bench_csv(rows, fh, no_timing=args.no_timing)
    for line in analysis:
        print(line)
    print(f"wrote {args.out}")
    return 0


def _cmd_bench_time(args) -> int:
    seed = _resolve_seed(args.seed)
    s_values = [int(tok) for tok in args.sparsity_grid.split(",") if tok.strip()]
    rows, lines = bench_time(
        d=args.dim,
        k=args.k,
        s_values=s_values,
        trials=args.trials,
        seed=seed,
        alpha=args.alpha,
        beta=args.beta,
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            write_timing_csv(rows, fh)
        print(f"wrote {args.out}")
    else:
        write_timing_csv(rows, sys.stdout)
    for line in lines:
        print(line)
    return 0


def _cmd_oracle_check(args) -> int:
    custom = [args.d, args.k, args.s, args.x]
    if any(v is not None for v in custom):
        if any(v is None for v in custom):
            raise DpjlError("--d, --k, --s and --x must be given together")
        x = np.asarray([float(tok) for tok in args.x.split(",")], dtype=np.float64)
        fixtures = [(args.d, args.k, args.s, x)]
    else:
        fixtures = DEFAULT_ORACLE_FIXTURES
    worst = 0.0
    for d, k, s, x in fixtures:
        x = np.asarray(x, dtype=np.float64)
        res = enumerate_sjlt_moments(d, k, s, x)
        norm_sq = float(x @ x)
        ident = (2.0 / k) * (norm_sq**2 - float((x**4).sum()))
        mean_err = abs(res.mean - norm_sq)
        var_err = abs(res.variance - ident)
        worst = max(worst, mean_err, var_err)
        print(
            f"d={d} k={k} s={s} configs={res.n} mean={res.mean!r} (target {norm_sq!r}) "
            f"variance={res.variance!r} (target {ident!r}) mean_err={mean_err:.3e} var_err={var_err:.3e}"
        )
    print(f"worst absolute deviation: {worst:.3e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dpjl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-transform", help="derive dimensions and write a transform file")
    p.add_argument("--type", required=True, choices=["sjlt", "fjlt", "iid"])
    p.add_argument("--alpha", type=float, default=0.25)
    p.add_argument("--beta", type=float, default=0.25)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--s", type=int, default=None)
    p.add_argument("--c-k", dest="c_k", type=float, default=2.0)
    p.add_argument("--c-s", dest="c_s", type=float, default=1.0)
    p.add_argument("--c-q", dest="c_q", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_transform)

    p = sub.add_parser("sketch", help="privatize one input vector")
    p.add_argument("--transform", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--site", choices=["output", "input"], default="output")
    p.add_argument("--mechanism", choices=["auto", "laplace", "gaussian"], default="auto")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--debug-zero-noise", dest="debug_zero_noise", action="store_true",
                   help="skip noise addition entirely (NON-PRIVATE; for testing)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sketch)

    p = sub.add_parser("estimate", help="estimate squared distance from two sketch files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--header", action="store_true", help="print the CSV header line first")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("bench-variance", help="variance crossover benchmark over a delta grid")
    p.add_argument("--schemes", required=True,
                   help="comma list: sjlt-laplace,sjlt-gaussian,iid-gaussian,fjlt-out-gaussian,fjlt-in-gaussian")
    p.add_argument("--dist-sq", dest="dist_sq", type=float, required=True)
    p.add_argument("--delta-grid", dest="delta_grid", required=True)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--s", type=int, default=None)
    p.add_argument("--q", type=float, default=1.0)
    p.add_argument("--no-timing", dest="no_timing", action="store_true",
                   help="omit wall times (golden-file reproducibility)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bench_variance)

    p = sub.add_parser("bench-time", help="sparse vs dense apply timing comparison")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--k", type=int, default=512)
    p.add_argument("--sparsity-grid", dest="sparsity_grid", default="8")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.25)
    p.add_argument("--beta", type=float, default=0.01)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_bench_time)

    p = sub.add_parser("oracle-check", help="exhaustive SJLT identities on desk-scale instances")
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--s", type=int, default=None)
    p.add_argument("--x", default=None, help="comma-separated input vector")
    p.set_defaults(func=_cmd_oracle_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except IncompatibleSketches as exc:
        print(f"dpjl: {exc}", file=sys.stderr)
        return 2
    except TooManyConfigs as exc:
        print(f"dpjl: {exc}", file=sys.stderr)
        return 3
    except DpjlError as exc:
        print(f"dpjl: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
