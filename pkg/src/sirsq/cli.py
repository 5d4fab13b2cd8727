"""Command-line interface.

Subcommands:
  simulate       run the experiment named in a config file over its seeds
  compare        similarity metrics between a simulated and an observed series
  oracle-check   exact truncated-chain solve vs event simulation
  network-stats  generate the configured network and export its degree data

Set SIRSQ_LOG=debug|info|warning to control log verbosity.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from sirsq import __version__
from sirsq.core import RandomSource
from sirsq.experiments import run_compare, run_experiment
from sirsq.io import CompareConfig, RunConfig, load_config
from sirsq.network import generate_ws


def _setup_logging():
    level = os.environ.get("SIRSQ_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    changes = {}
    if args.seeds_override:
        changes["seeds"] = tuple(int(s) for s in args.seeds_override.split(","))
    if args.out:
        changes["output_dir"] = args.out
    if changes:
        cfg = dataclasses.replace(cfg, **changes)
    return cfg


def cmd_simulate(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    manifest = run_experiment(cfg)
    print(json.dumps(manifest.aggregate, indent=2, default=float))
    if not manifest.ok:
        print(f"failed seeds: {manifest.failed_seeds}", file=sys.stderr)
        return 1
    return 0


def cmd_compare(args) -> int:
    compare = CompareConfig(
        sim_csv=args.sim,
        obs_csv=args.obs,
        shift=args.shift,
        date_column=args.date_column,
        value_column=args.value_column,
        sim_value_column=args.sim_value_column,
    )
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    cfg = RunConfig(
        experiment="compare",
        params=_minimal_params(),
        seeds=(0,),
        output_dir=str(outdir),
        compare=compare,
    )
    _, report = run_compare(cfg, outdir)
    print(json.dumps(report, indent=2))
    return 0


def _minimal_params():
    from sirsq.core import EpidemicParams

    return EpidemicParams(beta=0.0, gamma=0.0, alpha=0.0)


def cmd_oracle_check(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    if args.cap is not None:
        cfg = dataclasses.replace(cfg, oracle_cap=args.cap)
    if cfg.experiment != "oracle-check":
        cfg = dataclasses.replace(cfg, experiment="oracle-check")
    manifest = run_experiment(cfg)
    print(json.dumps(manifest.aggregate, indent=2, default=float))
    return 0 if manifest.ok else 1


def cmd_network_stats(args) -> int:
    cfg = load_config(args.config)
    if cfg.ws is None:
        print("config has no ws section", file=sys.stderr)
        return 1
    outdir = Path(args.out or cfg.output_dir) / "network-stats"
    outdir.mkdir(parents=True, exist_ok=True)
    for seed in cfg.seeds:
        rs = RandomSource(seed)
        net = generate_ws(cfg.ws, rs, protect_intensity=cfg.params.protect_intensity)
        seed_dir = outdir / str(seed)
        seed_dir.mkdir(parents=True, exist_ok=True)
        net.write_edge_list_csv(seed_dir / "edges.csv")
        net.write_degree_histogram_csv(seed_dir / "degree_histogram.csv")
        hist = net.degree_histogram()
        print(f"seed {seed}: nodes={net.node_count} edges={net.edge_count} "
              f"mean_degree={hist.mean_degree:g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sirsq", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a configured experiment")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--seeds-override", help="comma-separated seed list")
    p_sim.add_argument("--out", help="output directory override")
    p_sim.set_defaults(func=cmd_simulate)

    p_cmp = sub.add_parser("compare", help="similarity of simulated vs observed series")
    p_cmp.add_argument("--sim", required=True, help="resampled trajectory CSV")
    p_cmp.add_argument("--obs", required=True, help="dated observed case CSV")
    p_cmp.add_argument("--shift", type=int, default=0,
                       help="days the observations lag the simulation")
    p_cmp.add_argument("--date-column", default="date")
    p_cmp.add_argument("--value-column", default="cases")
    p_cmp.add_argument("--sim-value-column", default="i")
    p_cmp.add_argument("--out", default="out")
    p_cmp.set_defaults(func=cmd_compare)

    p_orc = sub.add_parser("oracle-check", help="truncated-chain solve vs simulation")
    p_orc.add_argument("--config", required=True)
    p_orc.add_argument("--cap", type=int)
    p_orc.add_argument("--seeds-override", help="comma-separated seed list")
    p_orc.add_argument("--out", help="output directory override")
    p_orc.set_defaults(func=cmd_oracle_check)

    p_net = sub.add_parser("network-stats", help="export network degree data")
    p_net.add_argument("--config", required=True)
    p_net.add_argument("--out")
    p_net.set_defaults(func=cmd_network_stats)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
