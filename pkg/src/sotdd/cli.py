"""Command-line entry point.

Every subcommand prints one JSON report line on stdout and a short human
summary on stderr.  Exit status: 0 success, 1 computation error, 2 usage
error.
"""

from __future__ import annotations

import argparse
import sys
import time

from . import experiments
from .engine import SotddConfig, project_dataset, sotdd, sotdd_from_sketches
from .errors import SotddError
from .io import RunReport, dataset_fingerprint, load_dataset, read_sketch, write_sketch
from .sampling import MomentOrderLaw


def _moment_law(text):
    try:
        return MomentOrderLaw.parse(text)
    except (ValueError, SotddError) as exc:
        raise argparse.ArgumentTypeError(f"bad moment law {text!r}: {exc}") from None


def _projector(text):
    if text == "linear":
        return ("linear", None)
    kind, _, shape = text.partition(":")
    if kind == "conv":
        try:
            dims = tuple(int(v) for v in shape.split(","))
        except ValueError:
            dims = ()
        if len(dims) == 3 and min(dims) > 0:
            return ("conv", dims)
    raise argparse.ArgumentTypeError(f"expected 'linear' or 'conv:H,W,C', got {text!r}")


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def _order(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value >= 1:
        raise argparse.ArgumentTypeError(f"p must be >= 1, got {value}")
    return value


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if len(values) < 1 or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return values


def _float_list(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _shared_flags() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--p", type=_order, default=2.0, help="Wasserstein order (default 2)")
    shared.add_argument("--L", type=_positive_int, default=1000, help="number of projections")
    shared.add_argument("--k", type=_positive_int, default=5, help="number of moments per projection")
    shared.add_argument(
        "--moment-law",
        type=_moment_law,
        default=None,
        help="poisson:r1,...,rk or uniform:LMAX (default poisson:1,...,k)",
    )
    shared.add_argument("--projector", type=_projector, default=("linear", None), help="linear | conv:H,W,C")
    shared.add_argument("--seed", type=int, default=0)
    shared.add_argument("--standardize", action="store_true", help="pooled per-coordinate standardization")
    shared.add_argument("--tie-phi", action=argparse.BooleanOptionalAction, default=True)
    shared.add_argument("--workers", type=_positive_int, default=1)
    shared.add_argument("--skip-overflow", action="store_true", help="drop projections whose moments overflow")
    shared.add_argument("--sketch-quantiles", type=_positive_int, default=None, help="lossy sketches with M quantiles")
    shared.add_argument("--psi-override", type=_float_list, default=None, help=argparse.SUPPRESS)
    shared.add_argument("--label-column", default="-1", help="CSV label column name or index (default last)")
    return shared


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sotdd", description="Sliced optimal transport dataset distance.")
    sub = parser.add_subparsers(dest="command", required=True)
    shared = _shared_flags()

    p = sub.add_parser("distance", parents=[shared], help="s-OTDD between two datasets")
    p.add_argument("a")
    p.add_argument("b")

    p = sub.add_parser("project", parents=[shared], help="write the projection sketch of one dataset")
    p.add_argument("a")
    p.add_argument("--out", required=True)

    p = sub.add_parser("merge", parents=[shared], help="s-OTDD from two sketch files")
    p.add_argument("s1")
    p.add_argument("s2")

    p = sub.add_parser("correlate", parents=[shared], help="s-OTDD vs a baseline over random split pairs")
    p.add_argument("a")
    p.add_argument("--splits", type=_positive_int, required=True, help="rows per side of each split")
    p.add_argument("--pairs", type=_positive_int, required=True, help="number of split pairs")
    p.add_argument("--baseline", choices=experiments.BASELINES, default="exact-otdd")
    p.add_argument("--split-seed", type=int, default=0)

    p = sub.add_parser("decay", parents=[shared], help="Monte Carlo error against L")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--grid", type=_int_list, required=True, help="ascending L values, comma separated")
    p.add_argument("--repeats", type=_positive_int, default=20)
    return parser


def _config(args, parser, L=None) -> SotddConfig:
    law = args.moment_law or MomentOrderLaw.poisson(range(1, args.k + 1))
    kind, shape = args.projector
    try:
        return SotddConfig(
            p=args.p,
            L=args.L if L is None else L,
            k=args.k,
            law=law,
            projector=kind,
            image_shape=shape,
            tie_phi=args.tie_phi,
            standardize=args.standardize,
            seed=args.seed,
            skip_overflow=args.skip_overflow,
            psi_override=args.psi_override,
            sketch_quantiles=args.sketch_quantiles,
            workers=args.workers,
        )
    except ValueError as exc:
        parser.error(str(exc))


def _label_column(args):
    text = args.label_column
    return int(text) if text.lstrip("-").isdigit() else text


def _base_report(command, config: SotddConfig) -> RunReport:
    return RunReport(
        command=command,
        L=config.L,
        p=config.p,
        k=config.k,
        seed=config.seed,
        projector=config.projector_spec,
        moment_law=config.law.spec(),
    )


def _fill(report: RunReport, estimate) -> RunReport:
    report.value = estimate.value
    report.mean_pp = estimate.mean_pp
    report.stderr_pp = estimate.stderr_pp
    report.L = estimate.L
    report.extra["dropped_projections"] = estimate.dropped
    return report


def _run(args, parser) -> RunReport:
    config = _config(args, parser)
    report = _base_report(args.command, config)
    if args.command == "distance":
        a, b = load_dataset(args.a, _label_column(args)), load_dataset(args.b, _label_column(args))
        report.inputs = {args.a: dataset_fingerprint(a), args.b: dataset_fingerprint(b)}
        return _fill(report, sotdd(a, b, config))
    if args.command == "project":
        if config.standardize:
            parser.error("--standardize needs both datasets; it is not available for project")
        a = load_dataset(args.a, _label_column(args))
        report.inputs = {args.a: dataset_fingerprint(a)}
        sketch = project_dataset(a, config=config)
        write_sketch(sketch, args.out)
        report.extra.update(sketch=args.out, fingerprint=sketch.fingerprint.hex(), n=sketch.n)
        return report
    if args.command == "merge":
        s1, s2 = read_sketch(args.s1), read_sketch(args.s2)
        report.inputs = {args.s1: s1.fingerprint.hex(), args.s2: s2.fingerprint.hex()}
        # projector/law flags do not apply to stored sketches
        report.k = report.seed = report.projector = report.moment_law = None
        return _fill(report, sotdd_from_sketches(s1, s2, config.p, config.workers, config.skip_overflow))
    if args.command == "correlate":
        a = load_dataset(args.a, _label_column(args))
        report.inputs = {args.a: dataset_fingerprint(a)}
        result = experiments.correlate(a, args.splits, args.pairs, config, args.baseline, args.split_seed)
        report.extra.update({k: v for k, v in result.items() if k not in ("command", "wall_time")})
        return report
    if args.command == "decay":
        a, b = load_dataset(args.a, _label_column(args)), load_dataset(args.b, _label_column(args))
        report.inputs = {args.a: dataset_fingerprint(a), args.b: dataset_fingerprint(b)}
        result = experiments.decay(a, b, config, args.grid, args.repeats)
        report.L = None
        report.extra.update({k: v for k, v in result.items() if k not in ("command", "wall_time")})
        return report
    parser.error(f"unknown command {args.command!r}")


def _summary(report: RunReport) -> str:
    if report.command in ("distance", "merge"):
        return f"s-OTDD_p = {report.value:.6g} (mean W_p^p {report.mean_pp:.6g} +/- {report.stderr_pp:.3g}, L={report.L})"
    if report.command == "project":
        return f"wrote sketch {report.extra['sketch']} (L={report.L}, n={report.extra['n']})"
    if report.command == "correlate":
        return f"pearson r = {report.extra['pearson']:.4f}, spearman rho = {report.extra['spearman']:.4f}"
    if report.command == "decay":
        slope = report.extra.get("slope")
        return "log-log slope = " + ("n/a" if slope is None else f"{slope:.4f}")
    return report.command


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    start = time.perf_counter()
    try:
        report = _run(args, parser)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (SotddError, OSError, ValueError) as exc:
        print(f"sotdd {args.command}: error: {exc}", file=sys.stderr)
        return 1
    report.wall_time = time.perf_counter() - start
    print(report.to_json())
    print(_summary(report), file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
