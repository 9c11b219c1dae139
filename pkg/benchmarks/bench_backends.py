"""Compare the compiled and pure-Python kernels on the same corpus.

    python benchmarks/bench_backends.py --users 200000 --iterations 5
"""
import argparse
import json

from bucketeer import _purepy
from bucketeer.harness import REPRO_PATTERN, AlgoVariant, CorpusSpec, run_latency_bench

try:
    from bucketeer import _core
except ImportError:
    _core = None


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--users", type=int, default=200_000)
    parser.add_argument("--python-users", type=int, default=20_000,
                        help="smaller corpus for the slow fallback")
    parser.add_argument("--iterations", type=int, default=5)
    parser.add_argument("--json", action="store_true")
    args = parser.parse_args()

    variants = list(AlgoVariant)
    reports = {}
    if _core is not None:
        reports["compiled"] = run_latency_bench(
            variants, CorpusSpec(args.users, REPRO_PATTERN, 0), args.iterations, backend=_core)
    reports["python"] = run_latency_bench(
        variants, CorpusSpec(args.python_users, REPRO_PATTERN, 0), args.iterations, backend=_purepy)

    if args.json:
        print(json.dumps({k: r.to_dict() for k, r in reports.items()}, indent=2))
        return
    for report in reports.values():
        print(report.table())
        print()
    if "compiled" in reports:
        print(f"{'variant':<8} {'compiled/python speedup':>24}")
        for v in variants:
            fast = reports["compiled"].ns_per_assignment[v.label]
            slow = reports["python"].ns_per_assignment[v.label]
            print(f"{v.label:<8} {slow / fast:>23.1f}x")


if __name__ == "__main__":
    main()
