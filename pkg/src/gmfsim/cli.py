"""Command line entry point.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
Log verbosity comes from ``GMFSIM_LOG_LEVEL`` (default WARNING).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .config import ExperimentConfig, load_config
from .errors import ConfigError, GmfError
from .harness import (
    compare_policies,
    emit_plot_data,
    format_table,
    prepare,
    run_experiment,
    sweep_rates,
    write_comparison_csv,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    changes = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        changes[key.strip()] = _parse_value(value)
    for flag, key in (("seed", "seed"), ("rounds", "n_rounds"), ("clients", "n_clients"), ("output", "output_path")):
        value = getattr(args, flag, None)
        if value is not None:
            changes[key] = value
    return cfg.with_overrides(**changes) if changes else cfg


def _split_list(text: str, cast=str) -> list:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise ConfigError("empty list")
    try:
        return [cast(t) for t in items]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_run(cfg, args):
    result = run_experiment(cfg)
    last = result.rows[-1]
    print(
        f"{last.policy}: rounds={len(result.rows)} test_accuracy={last.test_accuracy:.4f} "
        f"upload_bytes={last.upload_bytes_cum} download_bytes={last.download_bytes_cum}"
    )
    if cfg.output_path:
        print(f"metrics written to {cfg.output_path}")


def cmd_compare(cfg, args):
    policies = _split_list(args.policies)
    table, results = compare_policies(cfg, policies)
    print(format_table(table))
    if args.table:
        write_comparison_csv(table, args.table)
    if cfg.output_path:
        from .harness import emit_csv

        root, ext = os.path.splitext(cfg.output_path)
        for r in results:
            emit_csv(r.rows, f"{root}_{r.config.policy.kind}{ext or '.csv'}")


def cmd_sweep(cfg, args):
    rates = _split_list(args.rates, float)
    policies = _split_list(args.policies)
    sweep = sweep_rates(cfg, policies, rates)
    for (policy, rate), res in sorted(sweep.items()):
        print(f"{policy:<8} rate={rate:<5g} acc={res.final_accuracy:.4f} total_bytes={res.total_bytes}")
    out = args.plot_data or cfg.output_path
    if out:
        emit_plot_data(sweep, out)
        print(f"plot data written to {out}")


def cmd_partition_report(cfg, args):
    env = prepare(cfg)
    part = env.partition
    print(f"target EMD {cfg.target_emd:.4f}  achieved {part.achieved_emd:.4f}  mix {part.mix:.4f}")
    print(f"{'client':>6} {'samples':>8} {'l1_to_global':>13}  class proportions")
    for k, idx in enumerate(part.assignments):
        props = " ".join(f"{p:.2f}" for p in part.client_class_props[k])
        print(f"{k:>6} {len(idx):>8} {part.client_emd[k]:>13.4f}  {props}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmfsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="experiment JSON file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (dotted path, JSON value)")
        p.add_argument("--seed", type=int)
        p.add_argument("--rounds", type=int)
        p.add_argument("--clients", type=int)
        p.add_argument("--output", help="CSV output path")
        return p

    common(sub.add_parser("run", help="run one experiment")).set_defaults(func=cmd_run)
    p = common(sub.add_parser("compare", help="run several policies on one shared partition"))
    p.add_argument("--policies", default="dgc,gmc,dgcwgm,dgcwgmf")
    p.add_argument("--table", help="write the comparison table as CSV")
    p.set_defaults(func=cmd_compare)
    p = common(sub.add_parser("sweep-rate", help="accuracy and overhead over compression rates"))
    p.add_argument("--rates", default="0.1,0.3,0.5,0.7,0.9")
    p.add_argument("--policies", default="dgc,gmc,dgcwgm,dgcwgmf")
    p.add_argument("--plot-data", help="plot-data CSV path (defaults to --output)")
    p.set_defaults(func=cmd_sweep)
    common(sub.add_parser("partition-report", help="print the achieved EMD per client")).set_defaults(
        func=cmd_partition_report
    )
    return parser


def main(argv=None) -> int:
    level = os.environ.get("GMFSIM_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args.func(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BrokenPipeError:
        # downstream reader (e.g. ``head``) closed early
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK
    except (GmfError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
