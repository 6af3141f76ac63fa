"""``noisy-submod`` command line."""

from __future__ import annotations

import argparse
import logging
import sys

from .. import bounds
from ..core import AlgoConfig, GroundSet, NoisySubmodError, validate_config
from ..objectives import random_graph, save_graph, save_tagged_dataset, synthetic_coverage
from .runner import run_experiment, sweep, sweep_path
from .spec import load_spec
from .verify import verify

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="noisy-submod", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run every trial in a spec file and write the records CSV")
    r.add_argument("spec")

    s = sub.add_parser("sweep", help="run a spec and write per-point aggregates along one axis")
    s.add_argument("spec")
    s.add_argument("--axis", choices=("epsilon", "kappa"), required=True)

    v = sub.add_parser("verify", help="check invariants and guarantees against ground truth")
    v.add_argument("spec")

    b = sub.add_parser("bounds", help="print every closed-form quantity for one config")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--kappa", type=int, required=True)
    b.add_argument("--epsilon", type=float, required=True)
    b.add_argument("--delta", type=float, default=0.2)
    b.add_argument("--alpha", type=float, default=0.2)
    b.add_argument("--R", dest="range_r", type=float, default=2.0)

    g = sub.add_parser("gen", help="write a synthetic coverage dataset or graph")
    g.add_argument("kind", choices=("coverage", "graph"))
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--tags", type=int, default=30, help="tag vocabulary size (coverage)")
    g.add_argument("--degree", type=float, default=3.0, help="mean out-degree (graph)")
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("-o", "--output", required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "bounds":
            validate_config(AlgoConfig(args.kappa, args.epsilon, args.delta, args.alpha, args.range_r),
                            GroundSet(args.n))
            for key, val in bounds.all_bounds(args.n, args.kappa, args.epsilon, args.delta,
                                              args.alpha, args.range_r).items():
                print(f"{key}={val!r}" if isinstance(val, float) else f"{key}={val}")
            return EXIT_OK
        if args.command == "gen":
            if args.kind == "coverage":
                save_tagged_dataset(synthetic_coverage(args.n, args.tags, args.seed), args.output)
            else:
                save_graph(random_graph(args.n, args.degree, args.seed, rr_set_count=1), args.output)
            print(args.output)
            return EXIT_OK
        spec = load_spec(args.spec)
        if args.command == "run":
            records = run_experiment(spec)
            failed = sum(r.status.startswith("error") for r in records)
            print(f"{len(records)} records ({failed} failed) -> {spec.output_path}")
            return EXIT_OK
        if args.command == "sweep":
            rows = sweep(spec, args.axis)
            print(f"{len(rows)} aggregate rows -> {sweep_path(spec, args.axis)}")
            return EXIT_OK
        if args.command == "verify":
            report = verify(spec)
            print(report.text())
            return EXIT_OK if report.passed else EXIT_VERIFY
    except (NoisySubmodError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
