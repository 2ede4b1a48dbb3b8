"""Command-line entry point: ``fastkts {test,simulate,sweep,bench,qq}``."""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time

import numpy as np
from scipy.stats import norm

from . import __version__
from .baselines import mmd_block, mmd_linear, mmd_u_test
from .bench import bench_runtime
from .errors import ConfigError, FastKTSError, InvalidData
from .io import MatrixFile, dump_json, load_matrix
from .kernel import DEFAULT_MEDIAN_SCALE, DEFAULT_SUBSAMPLE, KernelConfig
from .simulate import (
    METHODS,
    SyntheticSpec,
    average_median_heuristic,
    binomial_band,
    estimate_power,
    ks_distance_normal,
    null_zscore_sample,
)
from .teststat import SCHEMA_VERSION, run_test


def _shape(text: str) -> tuple[int, int]:
    try:
        r, c = text.lower().split("x")
        return int(r), int(c)
    except ValueError:
        raise argparse.ArgumentTypeError(f"shape must look like ROWSxCOLS, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _alpha(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1), got {value}")
    return value


def _kernel_from_args(args) -> KernelConfig:
    if args.bandwidth == "median":
        return KernelConfig.median(args.median_subsample, None, args.median_scale)
    try:
        sigma = float(args.bandwidth)
    except ValueError:
        raise ConfigError(f"--bandwidth must be 'median' or a positive number, got {args.bandwidth!r}") from None
    return KernelConfig.fixed(sigma)


def _add_kernel_args(p):
    p.add_argument("--bandwidth", default="median", help="'median' or a fixed sigma")
    p.add_argument("--median-subsample", type=int, default=DEFAULT_SUBSAMPLE, metavar="K")
    p.add_argument("--median-scale", type=float, default=DEFAULT_MEDIAN_SCALE,
                   help="sigma = scale * median distance (default 1/sqrt(2))")


def _add_common(p, alpha=0.05):
    p.add_argument("--alpha", type=_alpha, default=alpha)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", help="write the JSON report here instead of stdout")


def _add_synthetic(p, default_family="null"):
    p.add_argument("--family", choices=("gmd", "gvd", "null", "lognormal"), default=default_family)
    p.add_argument("--param", type=float, default=None,
                   help="GMD shift (0.8), GVD variance (2.0) or log-normal a (0.0)")
    p.add_argument("--rho", type=float, default=0.4)
    p.add_argument("--d", type=int, default=100)
    p.add_argument("--m", type=int, default=1000)
    p.add_argument("--n", type=int, default=None, help="defaults to --m")
    p.add_argument("--reps", type=int, default=100)


def _spec_from_args(args) -> SyntheticSpec:
    defaults = {"gmd": 0.8, "gvd": 2.0, "null": 0.0, "lognormal": 0.0}
    param = defaults[args.family] if args.param is None else args.param
    n = args.m if args.n is None else args.n
    return SyntheticSpec(args.family, args.d, args.m, n, param, args.rho)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fastkts", description="Block-averaged kernel two-sample tests.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="test two data matrices")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--format", choices=("csv", "raw"), default="csv")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--header", action="store_true", help="CSV files have one header line")
    p.add_argument("--x-shape", type=_shape, help="ROWSxCOLS for raw input")
    p.add_argument("--y-shape", type=_shape, help="ROWSxCOLS for raw input")
    p.add_argument("--method", choices=("new", "mmd-u", "mmd-linear", "mmd-b"), default="new")
    p.add_argument("--scheme", choices=("new", "a1", "a2", "a3"), default="new")
    p.add_argument("--assign", choices=("seq", "shuffle"), default="shuffle")
    p.add_argument("--combine", choices=("bonferroni", "simes"), default="bonferroni")
    p.add_argument("--n-perms", type=int, default=199, help="permutations for mmd-u")
    p.add_argument("--per-block", action="store_true", help="include per-block Z-scores")
    _add_kernel_args(p)
    _add_common(p)

    p = sub.add_parser("simulate", help="Monte-Carlo rejection rates on synthetic data")
    _add_synthetic(p)
    p.add_argument("--method", default="new", help=f"comma-separated list from {', '.join(METHODS)}")
    p.add_argument("--assign", choices=("seq", "shuffle"), default="shuffle")
    p.add_argument("--combine", choices=("bonferroni", "simes"), default="bonferroni")
    p.add_argument("--csv", help="per-replication rejections and p-values")
    _add_kernel_args(p)
    _add_common(p)

    p = sub.add_parser("sweep", help="power against fixed bandwidths")
    _add_synthetic(p, "gmd")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--bandwidths", type=_float_list, help="absolute sigmas")
    group.add_argument("--offsets", type=_float_list, default=[-8, -6, -4, -2, 0, 2, 4, 6, 8],
                       help="sigmas relative to the averaged median-heuristic bandwidth (use --offsets=-4,0,4)")
    p.add_argument("--median-trials", type=int, default=20)
    p.add_argument("--median-subsample", type=int, default=DEFAULT_SUBSAMPLE, metavar="K")
    p.add_argument("--median-scale", type=float, default=DEFAULT_MEDIAN_SCALE)
    p.add_argument("--csv")
    _add_common(p)

    p = sub.add_parser("bench", help="runtime against sample size")
    p.add_argument("--sizes", type=_int_list, default=[2000, 4000, 8000], help="comma-separated m (= n)")
    p.add_argument("--d", type=int, default=100)
    p.add_argument("--method", choices=METHODS, default="new")
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("qq", help="null sample of the aggregated statistics")
    p.add_argument("--d", type=int, default=100)
    p.add_argument("--m", type=int, default=1024)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--scheme", choices=("new", "a1", "a2", "a3"), default="new")
    p.add_argument("--csv", help="write stat_w, stat_d per replication")
    _add_kernel_args(p)
    _add_common(p)
    return parser


def _emit(doc: dict, out) -> None:
    text = dump_json(doc, out)
    if out is None:
        sys.stdout.write(text)


def cmd_test(args) -> None:
    def load(path, shape):
        rows, cols = shape if shape else (None, None)
        return load_matrix(MatrixFile(path, args.format, args.delimiter, args.header, rows, cols))

    if args.format == "raw" and (args.x_shape is None or args.y_shape is None):
        raise ConfigError("raw input needs --x-shape and --y-shape")
    x = load(args.x, args.x_shape)
    y = load(args.y, args.y_shape)
    kernel = _kernel_from_args(args)
    if args.method == "new":
        res = run_test(x, y, kernel, args.scheme, args.assign, args.alpha, args.seed,
                       threads=args.threads, combine=args.combine, keep_blocks=args.per_block)
        doc = res.to_dict(include_blocks=args.per_block)
    else:
        t0 = time.perf_counter()
        if x.shape[1] != y.shape[1]:
            raise InvalidData(f"dimension mismatch: x has {x.shape[1]} columns, y has {y.shape[1]}")
        if args.method == "mmd-u":
            res = mmd_u_test(x, y, kernel, n_perms=args.n_perms, seed=args.seed)
        elif args.method == "mmd-linear":
            res = mmd_linear(x, y, kernel, seed=args.seed)
        else:
            res = mmd_block(x, y, kernel, seed=args.seed)
        doc = {"schema_version": SCHEMA_VERSION, **res.to_dict(),
               "reject": bool(res.p_value < args.alpha), "alpha_level": args.alpha,
               "seed": args.seed, "elapsed_ms": (time.perf_counter() - t0) * 1e3}
    _emit(doc, args.out)


def cmd_simulate(args) -> None:
    spec = _spec_from_args(args)
    methods = [m.strip() for m in args.method.split(",") if m.strip()]
    report = estimate_power(spec, methods, args.alpha, args.reps, args.seed, _kernel_from_args(args),
                            assign=args.assign, threads=args.threads, combine=args.combine)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rep", "method", "reject", "p_value"])
            for name in methods:
                s = report.per_method[name]
                for r, (rej, p) in enumerate(zip(s.rejections, s.p_values)):
                    w.writerow([r, name, int(rej), repr(p)])
    _emit(report.to_dict(), args.out)


def cmd_sweep(args) -> None:
    spec = _spec_from_args(args)
    if args.bandwidths:
        center = None
        sigmas = args.bandwidths
    else:
        center = average_median_heuristic(spec, args.median_trials, args.seed, args.median_subsample,
                                          args.median_scale)
        sigmas = [center + o for o in args.offsets if center + o > 0]
    rows = []
    for sigma in sigmas:
        rep = estimate_power(spec, "new", args.alpha, args.reps, args.seed, KernelConfig.fixed(sigma),
                             threads=args.threads)
        rows.append({"bandwidth": float(sigma), "power": rep.rejection_rate, "std_error": rep.std_error})
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bandwidth", "power", "std_error"])
            for r in rows:
                w.writerow([repr(r["bandwidth"]), repr(r["power"]), repr(r["std_error"])])
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "sweep",
        "spec": {"family": spec.family, "d": spec.d, "m": spec.m, "n": spec.n, "param": spec.param, "rho": spec.rho},
        "alpha_level": args.alpha,
        "n_reps": args.reps,
        "master_seed": args.seed,
        "median_bandwidth": center,
        "rows": rows,
    }
    _emit(doc, args.out)


def cmd_bench(args) -> None:
    doc = bench_runtime([(s, s) for s in args.sizes], args.d, args.method, args.runs, args.seed)
    _emit(doc, args.out)


def cmd_qq(args) -> None:
    n = args.m if args.n is None else args.n
    spec = SyntheticSpec.null(args.d, args.m, n)
    z = null_zscore_sample(spec, args.reps, args.seed, _kernel_from_args(args), args.scheme,
                           threads=args.threads)
    if args.csv:
        np.savetxt(args.csv, z, fmt="%.17g", delimiter=",", header="stat_w,stat_d", comments="")
    lo, hi = binomial_band(args.alpha, args.reps)
    p_w = norm.sf(z[:, 0])
    p_d = np.minimum(1.0, 2.0 * norm.sf(np.abs(z[:, 1])))
    rate = float(np.mean(np.minimum(1.0, 2.0 * np.minimum(p_w, p_d)) < args.alpha))
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "qq",
        "spec": {"family": "null", "d": args.d, "m": args.m, "n": n},
        "n_reps": args.reps,
        "master_seed": args.seed,
        "ks_w": ks_distance_normal(z[:, 0]),
        "ks_d": ks_distance_normal(z[:, 1]),
        "mean": [float(v) for v in z.mean(axis=0)],
        "variance": [float(v) for v in z.var(axis=0, ddof=1)],
        "alpha_level": args.alpha,
        "rejection_rate": rate,
        "binomial_band_99": [lo, hi],
    }
    _emit(doc, args.out)


COMMANDS = {"test": cmd_test, "simulate": cmd_simulate, "sweep": cmd_sweep, "bench": cmd_bench, "qq": cmd_qq}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except FastKTSError as exc:
        print(f"fastkts: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"fastkts: I/O error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
