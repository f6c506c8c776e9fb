"""Command line entry point: ``samplepick run | derive-params | gen-trace``."""
from __future__ import annotations

import argparse
import json
import sys

from .controller import derive_params
from .harness.config import ConfigError, load_config
from .harness.report import emit_report, report_csv
from .harness.runner import run_experiment
from .model import ZipfConfig, generate_zipf_trace, write_trace


def _run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    report = run_experiment(cfg)
    if args.out:
        emit_report(report, args.out)
    else:
        sys.stdout.write(report_csv(report))
    return 0


def _derive(args) -> int:
    d = derive_params(args.T, args.p, args.N, t=args.t)
    print(json.dumps({"t_max": d.t_max, "T_min": d.T_min, "v_min": d.v_min,
                      "feasible": d.feasible}, indent=2))
    return 0 if d.feasible else 1


def _gen(args) -> int:
    cfg = ZipfConfig(flow_count=args.flows, alpha=args.alpha, packet_count=args.packets,
                     rate=args.rate, seed=args.seed)
    write_trace(generate_zipf_trace(cfg), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="samplepick", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="report path ending in .csv or .json (default: CSV to stdout)")
    run.set_defaults(func=_run)

    der = sub.add_parser("derive-params", help="suspicion threshold and capacity for T, p, N")
    der.add_argument("--T", type=float, required=True)
    der.add_argument("--p", type=float, required=True)
    der.add_argument("--N", type=float, required=True)
    der.add_argument("--t", type=float, help="chosen suspicion threshold for v_min")
    der.set_defaults(func=_derive)

    gen = sub.add_parser("gen-trace", help="write a synthetic Zipf trace as CSV")
    gen.add_argument("--flows", type=int, default=50_000)
    gen.add_argument("--alpha", type=float, default=1.1)
    gen.add_argument("--packets", type=int, default=1_000_000)
    gen.add_argument("--rate", type=float, default=20_000.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=_gen)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
