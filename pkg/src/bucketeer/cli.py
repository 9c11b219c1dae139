"""Command-line interface.

Exit codes: 0 success, 1 a validation test rejected its null hypothesis
(or ``repro`` disagreed with a published verdict), 2 usage or config error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from bucketeer import harness
from bucketeer.assignment import ExperimentConfig, assign_new, assign_original, parse_buckets
from bucketeer.errors import BucketeerError
from bucketeer.harness import AlgoVariant, CorpusSpec

EXIT_OK, EXIT_REJECT, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _variant(text: str) -> AlgoVariant:
    try:
        return AlgoVariant.parse(text)
    except BucketeerError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _percent(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if not 0 <= value <= 100:
        raise argparse.ArgumentTypeError(f"{value} is outside [0, 100]")
    return value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"{value} must be >= 1")
    return value


def _default_seed() -> int:
    raw = os.environ.get("BUCKETEER_SEED")
    if raw is None:
        return 0
    try:
        return int(raw, 0)
    except ValueError:
        raise BucketeerError(f"BUCKETEER_SEED={raw!r} is not an integer") from None


def _add_corpus(p: argparse.ArgumentParser, users: int = harness.DEFAULT_USERS) -> None:
    p.add_argument("--users", type=_positive, default=users, help="corpus size (default %(default)s)")
    p.add_argument("--id-pattern", default=harness.REPRO_PATTERN,
                   help="user ID template with {index} and optional {hex} (default %(default)s)")
    p.add_argument("--seed", type=int, default=None,
                   help="corpus seed (default: $BUCKETEER_SEED, else 0)")


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pretty", action="store_true", help="indent JSON output")
    p.add_argument("--out", type=Path, help="also write the JSON report to this file")
    p.add_argument("--alpha", type=float, default=0.05, help="significance level (default %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bucketeer", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("assign", help="assign one user")
    p.add_argument("--experiment", required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--algo", type=_variant, required=True, help="1-4")
    p.add_argument("--exposure", type=_percent, required=True)
    p.add_argument("--buckets", required=True, help="name:pct,name:pct summing to 100")
    p.add_argument("--salt", default="", help="salt for algo 1 (default: experiment ID)")
    p.add_argument("--trace", action="store_true", help="print the full assignment trace")
    p.add_argument("--pretty", action="store_true")

    p = sub.add_parser("uniformity", help="chi-square uniformity of R_b given R_e")
    p.add_argument("--algo", type=_variant, required=True)
    p.add_argument("--exposure", type=_percent, required=True)
    p.add_argument("--condition", choices=["lt", "eq"], default="lt")
    p.add_argument("--y", type=int, default=None, help="R_e threshold (default: exposure)")
    p.add_argument("--experiment", default=harness.DEFAULT_EXPERIMENTS[0])
    p.add_argument("--plot-data", type=Path, metavar="DIR", help="write histogram.csv here")
    _add_corpus(p)
    _add_output(p)

    p = sub.add_parser("independence", help="chi-square independence across two experiments")
    p.add_argument("--algo", type=_variant, required=True)
    p.add_argument("--experiments", default=",".join(harness.DEFAULT_EXPERIMENTS),
                   help="two comma-separated experiment IDs (default %(default)s)")
    p.add_argument("--plot-data", type=Path, metavar="DIR", help="write scatter.csv here")
    _add_corpus(p)
    _add_output(p)

    p = sub.add_parser("srm", help="sample ratio mismatch check")
    p.add_argument("--algo", type=_variant, required=True)
    p.add_argument("--experiment", default=harness.DEFAULT_EXPERIMENTS[0])
    p.add_argument("--exposure", type=_percent, default=100)
    p.add_argument("--buckets", default="control:50,treatment:50")
    p.add_argument("--salt", default="")
    p.add_argument("--plot-data", type=Path, metavar="DIR", help="write bucket_counts.csv here")
    _add_corpus(p)
    _add_output(p)

    p = sub.add_parser("bench", help="assignment latency per variant")
    p.add_argument("--algos", default="1,2,3,4", help="comma-separated variants (default %(default)s)")
    p.add_argument("--iterations", type=_positive, default=5)
    p.add_argument("--backend", choices=["auto", "compiled", "python"], default="auto")
    p.add_argument("--json", action="store_true", help="print JSON instead of a table")
    _add_corpus(p, users=200_000)

    p = sub.add_parser("repro", help="regenerate every table and figure dataset")
    p.add_argument("--out", type=Path, required=True, metavar="DIR")
    _add_corpus(p)
    p.add_argument("--alpha", type=float, default=0.05)
    return parser


def _corpus(args) -> CorpusSpec:
    seed = args.seed if args.seed is not None else _default_seed()
    return CorpusSpec(args.users, args.id_pattern, seed)


def _emit(doc: dict, args) -> None:
    text = json.dumps(doc, indent=2 if getattr(args, "pretty", False) else None, sort_keys=True)
    print(text)
    if getattr(args, "out", None):
        args.out.write_text(text + "\n", encoding="utf-8")


def _cmd_assign(args) -> int:
    config = ExperimentConfig(args.experiment, args.exposure, parse_buckets(args.buckets), salt=args.salt)
    if args.algo is AlgoVariant.ALGO1:
        trace = assign_original(config, args.user)
    else:
        trace = assign_new(config, args.user, args.algo.algorithm)
    _emit(trace.to_dict() if args.trace else trace.assignment.to_dict(), args)
    return EXIT_OK


def _cmd_uniformity(args) -> int:
    rep = harness.run_uniformity(args.algo, _corpus(args), args.exposure, args.condition,
                                 args.y, args.experiment, args.alpha)
    if args.plot_data:
        args.plot_data.mkdir(parents=True, exist_ok=True)
        harness.write_histogram_csv(args.plot_data / "histogram.csv", rep.payload["histogram"])
    _emit(rep.to_dict(), args)
    return EXIT_REJECT if rep.reject else EXIT_OK


def _cmd_independence(args) -> int:
    ids = tuple(e.strip() for e in args.experiments.split(","))
    if len(ids) != 2:
        raise BucketeerError(f"--experiments needs exactly two IDs, got {len(ids)}")
    rep = harness.run_independence(args.algo, _corpus(args), ids, args.alpha)
    if args.plot_data:
        args.plot_data.mkdir(parents=True, exist_ok=True)
        harness.write_scatter_csv(args.plot_data / "scatter.csv", rep.payload["scatter"])
    _emit(rep.to_dict(), args)
    return EXIT_REJECT if rep.reject else EXIT_OK


def _cmd_srm(args) -> int:
    config = ExperimentConfig(args.experiment, args.exposure, parse_buckets(args.buckets), salt=args.salt)
    rep = harness.srm_report(args.algo, _corpus(args), config, args.alpha)
    if args.plot_data:
        args.plot_data.mkdir(parents=True, exist_ok=True)
        harness._write_csv(args.plot_data / "bucket_counts.csv", ["bucket", "count"],
                           rep.payload["bucket_counts"].items())
    _emit(rep.to_dict(), args)
    return EXIT_REJECT if rep.reject else EXIT_OK


def _cmd_bench(args) -> int:
    variants = [AlgoVariant.parse(v.strip()) for v in args.algos.split(",")]
    backend = None
    if args.backend == "python":
        from bucketeer import _purepy as backend
    elif args.backend == "compiled":
        try:
            from bucketeer import _core as backend
        except ImportError:
            raise BucketeerError("compiled backend is not built") from None
    report = harness.run_latency_bench(variants, _corpus(args), args.iterations, backend=backend)
    print(json.dumps(report.to_dict(), sort_keys=True) if args.json else report.table())
    return EXIT_OK


def _cmd_repro(args) -> int:
    summary = harness.repro(args.out, _corpus(args), args.alpha)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK if summary["ok"] else EXIT_REJECT


_COMMANDS = {
    "assign": _cmd_assign,
    "uniformity": _cmd_uniformity,
    "independence": _cmd_independence,
    "srm": _cmd_srm,
    "bench": _cmd_bench,
    "repro": _cmd_repro,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except BucketeerError as exc:
        print(f"bucketeer {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
