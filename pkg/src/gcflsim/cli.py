"""Command line entry points.

Subcommands: ``analyze-properties`` (property statistics with random-null
significance), ``analyze-hetero`` (pairwise structure/feature heterogeneity),
``run`` (federated experiments from a config file), and ``calibrate``
(epsilon grid search). Exit status is 0 on success; on failure the named
error class is printed to stderr and a class-specific nonzero code returned.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import (
    ArgumentError,
    ConfigurationError,
    CorruptDatasetError,
    GcflSimError,
    IngestionError,
    UndefinedEmbeddingError,
    UndefinedStatisticError,
)
from .harness import (
    ExperimentConfig,
    calibrate_epsilons,
    load_dataset_for_federation,
    run_experiment,
)
from .hetero import pairwise_heterogeneity, write_heterogeneity_csv
from .properties import PROPERTY_NAMES, property_significance

logger = logging.getLogger(__name__)

EXIT_CODES = {
    ArgumentError: 2,
    ConfigurationError: 3,
    IngestionError: 4,
    CorruptDatasetError: 5,
    UndefinedStatisticError: 6,
    UndefinedEmbeddingError: 7,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gcflsim",
        description="Deterministic clustered federated learning over graph datasets",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    props = sub.add_parser("analyze-properties",
                           help="graph property statistics vs G(n,m) random nulls")
    props.add_argument("--data-root", required=True)
    props.add_argument("--dataset", required=True)
    props.add_argument("--seed", type=int, default=0)
    props.add_argument("--out", default="properties.csv")

    het = sub.add_parser("analyze-hetero",
                         help="pairwise structure/feature heterogeneity of two datasets")
    het.add_argument("--data-root", required=True)
    het.add_argument("--set-a", required=True)
    het.add_argument("--set-b", required=True)
    het.add_argument("--awe-length", type=int, default=4)
    het.add_argument("--bins", type=int, default=20)
    het.add_argument("--pair-budget", type=int, default=2000)
    het.add_argument("--seed", type=int, default=0)
    het.add_argument("--out", default="hetero_pairs.csv")

    run = sub.add_parser("run", help="run federated experiments from a config file")
    run.add_argument("--config", required=True, help="key = value config file")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override a config entry (repeatable)")

    cal = sub.add_parser("calibrate", help="grid-search eps1/eps2 for a clustered algorithm")
    cal.add_argument("--config", required=True)
    cal.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    cal.add_argument("--algorithm", default="gcfl", choices=["gcfl", "gcflplus"])
    cal.add_argument("--eps1-grid", required=True, help="comma-separated values")
    cal.add_argument("--eps2-grid", required=True, help="comma-separated values")
    cal.add_argument("--rounds", type=int, default=50)
    cal.add_argument("--out", default="calibration.csv")
    return parser


def cmd_analyze_properties(args) -> int:
    dataset = load_dataset_for_federation(args.data_root, args.dataset)
    report = property_significance(dataset, args.seed)
    report.write_csv(args.out)
    print(f"{args.dataset}: {len(dataset)} graphs")
    for prop in PROPERTY_NAMES:
        stat = report.rows[prop]
        p = f"{stat.p_value:.3g}" if stat.computed else "not computed"
        print(f"  {prop:24s} real {stat.real:10.4f}  random {stat.random:10.4f}  p {p}")
    print(f"wrote {args.out}")
    return 0


def cmd_analyze_hetero(args) -> int:
    set_a = load_dataset_for_federation(args.data_root, args.set_a)
    set_b = set_a if args.set_b == args.set_a else \
        load_dataset_for_federation(args.data_root, args.set_b)
    report = pairwise_heterogeneity(set_a, set_b, args.awe_length, args.bins,
                                    args.pair_budget, args.seed)
    write_heterogeneity_csv(args.out, [report])
    print(f"{report.set_a} vs {report.set_b}: "
          f"structure {report.structure_mean:.4f} (+/-{report.structure_std:.4f})  "
          f"feature {report.feature_mean:.4f} (+/-{report.feature_std:.4f})")
    print(f"wrote {args.out}")
    return 0


def cmd_run(args) -> int:
    config = ExperimentConfig.from_file(args.config).with_overrides(args.set)
    summaries = run_experiment(config)
    for s in summaries:
        print(f"{s['algorithm']:10s} seed {s['seed']}: "
              f"avg acc {s['average']:.4f}  min gain {s['min_gain']:+.4f}  "
              f"improved {s['improved']}/{s['total']}")
    print(f"wrote CSV outputs to {Path(config.out_dir).resolve()}")
    return 0


def cmd_calibrate(args) -> int:
    config = ExperimentConfig.from_file(args.config).with_overrides(args.set)
    eps1_grid = [float(x) for x in args.eps1_grid.split(",") if x.strip()]
    eps2_grid = [float(x) for x in args.eps2_grid.split(",") if x.strip()]
    best1, best2, rows = calibrate_epsilons(config, eps1_grid, eps2_grid, args.rounds,
                                            args.algorithm, args.out)
    for row in rows:
        print(f"  eps1={row['eps1']:g} eps2={row['eps2']:g} "
              f"acc={row['accuracy']:.4f} clusters={row['clusters']}")
    print(f"best: eps1={best1:g} eps2={best2:g} (wrote {args.out})")
    return 0


COMMANDS = {
    "analyze-properties": cmd_analyze_properties,
    "analyze-hetero": cmd_analyze_hetero,
    "run": cmd_run,
    "calibrate": cmd_calibrate,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except GcflSimError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        for cls, code in EXIT_CODES.items():
            if type(exc) is cls:
                return code
        for cls, code in EXIT_CODES.items():
            if isinstance(exc, cls):
                return code
        return 1


if __name__ == "__main__":
    sys.exit(main())
