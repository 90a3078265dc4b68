"""Command-line entry point: ``dcomp {run,fig2,fig3,fig4,replay}``."""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError, InvalidParameterError
from .experiment import (
    ALGORITHMS,
    ExperimentConfig,
    apply_overrides,
    load_config,
    preset,
    replay,
    run_experiment,
    write_trace,
)
from .model import H0, H1

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _common(p):
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a configuration key (repeatable)")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--topology", help="broadcast | ring:<d> | random:<p>")
    p.add_argument("--grid", help="comma-separated M/N ratios")
    p.add_argument("--workers", type=int, help="worker processes (0: one per CPU)")
    p.add_argument("--out", default="-", help="summary CSV path (default stdout)")
    p.add_argument("--trace", help="write per-round trace CSV here")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="dcomp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("run", help="run an experiment from a config file and overrides"))
    for name, what in (("fig2", "support recovery vs M/N"), ("fig3", "rounds per node vs M/N"),
                       ("fig4", "detection metrics vs M/N")):
        _common(sub.add_parser(name, help=what))
    rp = sub.add_parser("replay", help="re-run one trial and print its round trace")
    _common(rp)
    rp.add_argument("--preset", choices=("fig2", "fig3", "fig4"))
    rp.add_argument("--trial", type=int, required=True)
    rp.add_argument("--M", dest="m", type=int, help="measurement count (default: first grid point)")
    rp.add_argument("--algorithm", choices=ALGORITHMS)
    rp.add_argument("--hypothesis", choices=(H1, H0), default=H1)
    return parser


def make_config(args) -> ExperimentConfig:
    if args.command in ("fig2", "fig3", "fig4"):
        cfg = preset(args.command)
    elif getattr(args, "preset", None):
        cfg = preset(args.preset)
    else:
        cfg = ExperimentConfig()
    if args.config:
        cfg = load_config(args.config, cfg)
    pairs = list(args.set)
    for key in ("seed", "trials", "topology", "workers"):
        value = getattr(args, key)
        if value is not None:
            pairs.append((key, value))
    if args.grid:
        pairs.append(("ratios", args.grid))
    pairs.append(("out", args.out))
    if args.trace and args.command != "replay":
        pairs.append(("trace", args.trace))
    return apply_overrides(cfg, pairs).validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = make_config(args)
    except (ConfigError, InvalidParameterError) as exc:
        print(f"dcomp: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"dcomp: cannot read configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "replay":
            record, rows = replay(cfg, args.trial, args.m, args.algorithm, args.hypothesis)
            out = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
            try:
                write_trace(rows, out)
            finally:
                if out is not sys.stdout:
                    out.close()
            print(f"# support={list(record.estimates[0].indices)} true={list(record.true_support.indices)}"
                  f" decision={record.decision} rounds={record.rounds_per_node}", file=sys.stderr)
        else:
            text = run_experiment(cfg)
            if cfg.out == "-":
                sys.stdout.write(text)
    except (ConfigError, InvalidParameterError) as exc:
        print(f"dcomp: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ArithmeticError) as exc:
        print(f"dcomp: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
