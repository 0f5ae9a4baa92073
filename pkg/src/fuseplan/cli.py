"""Command-line front end.

Subcommands: derive-scheme, partition, compare, coexplore, alpha-sweep,
multicore, report.  Experiments read a JSON config file; a few common knobs
have CLI flags that override the file.  Exit codes: 0 ok, 1 config error,
2 infeasible model, 3 internal invariant breach.

Examples:
    fuseplan derive-scheme --model models/toy_forkjoin.json --force-tile 2
    fuseplan partition --config configs/compare_small.json --algorithm ga
    fuseplan compare --config configs/compare_small.json
    fuseplan coexplore --config configs/coexplore_small.json
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .graph import GraphError, PartitionError, load_graph, load_partition
from .hardware import HardwareConfig
from .runner import (EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_INTERNAL, EXIT_OK,
                     ConfigError, InfeasibleModelError, cmd_alpha_sweep,
                     cmd_compare_partitioners, cmd_coexplore, cmd_derive_scheme,
                     cmd_multicore, cmd_partition, cmd_report, load_config)
from .schedule import RateConsistencyError, UnschedulableError


def _add_config_arg(sub, required=True):
    sub.add_argument("--config", required=required, help="experiment config JSON file")
    sub.add_argument("--output-dir", help="override the config's output directory")
    sub.add_argument("--seed", type=int, help="override the first seed")
    sub.add_argument("--budget", type=int, help="override the optimizer sample budget")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fuseplan", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sp = ap.add_subparsers(dest="command", required=True)

    ds = sp.add_parser("derive-scheme", help="print a subgraph execution scheme")
    ds.add_argument("--model", required=True, help="graph JSON file")
    ds.add_argument("--partition", help="partition JSON file (default: whole graph)")
    ds.add_argument("--force-tile", type=int, default=None,
                    help="override the stage-1 output tile size")
    ds.add_argument("--json", dest="json_out", help="also write the scheme as JSON")
    ds.add_argument("--config", help="experiment config for the hardware block")

    pt = sp.add_parser("partition", help="run one partitioner on one model")
    _add_config_arg(pt)
    pt.add_argument("--algorithm", default="ga",
                    choices=["ga", "sa", "greedy", "dp", "enum"])
    pt.add_argument("--model", help="override the config's model path")

    cp = sp.add_parser("compare", help="compare partitioners at fixed hardware")
    _add_config_arg(cp)

    ce = sp.add_parser("coexplore", help="capacity/partition co-exploration table")
    _add_config_arg(ce)

    asw = sp.add_parser("alpha-sweep", help="capacity/metric trade-off across alphas")
    _add_config_arg(asw)
    asw.add_argument("--alphas", help="comma-separated alpha list override")

    mc = sp.add_parser("multicore", help="multi-core and batch evaluation grid")
    _add_config_arg(mc)
    mc.add_argument("--cores", help="comma-separated core counts override")
    mc.add_argument("--batches", help="comma-separated batch sizes override")

    rp = sp.add_parser("report", help="summarize an output directory")
    rp.add_argument("--outdir", required=True)
    return ap


def _config_from_args(args) -> "ExperimentConfig":
    overrides = {}
    if getattr(args, "output_dir", None):
        overrides["output_dir"] = args.output_dir
    if getattr(args, "model", None):
        overrides["models"] = [args.model]
    if getattr(args, "alphas", None):
        overrides["alphas"] = [float(a) for a in args.alphas.split(",")]
    if getattr(args, "cores", None):
        overrides["cores"] = [int(c) for c in args.cores.split(",")]
    if getattr(args, "batches", None):
        overrides["batches"] = [int(b) for b in args.batches.split(",")]
    cfg = load_config(args.config, overrides)
    if getattr(args, "seed", None) is not None:
        cfg.seeds = [args.seed] + cfg.seeds[1:]
    if getattr(args, "budget", None) is not None:
        from dataclasses import replace
        cfg.params = replace(cfg.params, budget=args.budget)
    if not cfg.models:
        raise ConfigError("no model configured (set 'model' or 'models')")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "derive-scheme":
            graph = load_graph(args.model)
            if args.config:
                hw = load_config(args.config).hardware
            else:
                hw = HardwareConfig()
            partition = load_partition(args.partition) if args.partition else None
            cmd_derive_scheme(graph, hw, partition, tile_override=args.force_tile,
                              json_out=args.json_out)
        elif args.command == "partition":
            cmd_partition(_config_from_args(args), args.algorithm)
        elif args.command == "compare":
            print(cmd_compare_partitioners(_config_from_args(args)))
        elif args.command == "coexplore":
            print(cmd_coexplore(_config_from_args(args)))
        elif args.command == "alpha-sweep":
            print(cmd_alpha_sweep(_config_from_args(args)))
        elif args.command == "multicore":
            print(cmd_multicore(_config_from_args(args)))
        elif args.command == "report":
            cmd_report(Path(args.outdir))
        else:  # pragma: no cover - argparse enforces the choices
            return EXIT_CONFIG
    except (ConfigError, GraphError, PartitionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleModelError, UnschedulableError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except RateConsistencyError as exc:
        print(f"internal invariant breach: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
