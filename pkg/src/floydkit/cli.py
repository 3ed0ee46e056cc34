"""Command line entry point: ``floydkit <driver> [flags]``.

Flags fill an experiment configuration; ``--config FILE`` (JSON) is applied
on top, so values in the file win.  Driver-specific inputs go in ``params``,
either in the config file or as repeated ``--param key=JSON`` flags.
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import DRIVERS, ExperimentConfig, ExperimentError, UsageError, run_experiment
from .groups import DEFAULT_VERTEX_BUDGET


def _param(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="floydkit", description="Floyd-metric experiments on Cayley balls")
    sub = parser.add_subparsers(dest="driver", metavar="DRIVER")
    for name in DRIVERS:
        p = sub.add_parser(name, help=f"run the {name} driver")
        p.add_argument("--group", help="builtin name, inline JSON or JSON file (default F2)")
        p.add_argument("--f", help="scaling function, e.g. exp:1/2 or invpow:2 (default exp:1/2)")
        p.add_argument("--alpha", help="distortion function, e.g. n^2 or poly:0,0,1")
        p.add_argument("--c", help="quasigeodesic constant")
        p.add_argument("--radius", type=int, help="ball radius")
        p.add_argument("--epsilon", help="epsilon as a rational, e.g. 1/10")
        p.add_argument("--seed", type=int, help="random seed")
        p.add_argument("--samples", type=int, help="number of sampled paths")
        p.add_argument("--out", help="output directory (default results)")
        p.add_argument("--budget", type=int, help=f"vertex budget (default {DEFAULT_VERTEX_BUDGET})")
        p.add_argument("--config", help="JSON config file; its values override flags")
        p.add_argument("--param", action="append", type=_param, default=[], metavar="KEY=JSON",
                       help="driver parameter (repeatable)")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    doc = {"driver": args.driver}
    for key in ("group", "f", "alpha", "c", "radius", "epsilon", "seed", "samples", "out", "budget"):
        value = getattr(args, key)
        if value is not None:
            doc[key] = value
    params = dict(args.param)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not file_doc:
            raise UsageError("empty experiment configuration")
        params.update(file_doc.pop("params", {}))
        doc.update(file_doc)
    if params:
        doc["params"] = params
    return ExperimentConfig.from_dict(doc)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.driver:
        parser.print_usage(sys.stderr)
        print("floydkit: error: choose a driver", file=sys.stderr)
        return 2
    try:
        config = config_from_args(args)
        doc = run_experiment(config)
    except UsageError as exc:
        print(f"floydkit: usage error: {exc}", file=sys.stderr)
        return 2
    except ExperimentError as exc:
        print(f"floydkit: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"driver": config.driver, "out": config.out, "summary": doc["summary"]},
                     sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
