"""``polebench`` command line entry point."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import typing
import warnings

from .errors import ConfigError, PolebenchError, RankDeficient, ZeroLeadingSample
from .experiments import EXPERIMENTS, ExperimentConfig, run

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_ZERO_LEADING = 3
EXIT_RANK_DEFICIENT = 4

# flags with their own spelling
_SPECIAL = {"experiment", "seeds", "out"}


def _flag_type(f: dataclasses.Field):
    """argparse converter for a config field; lists are read as JSON, ``null`` clears optionals."""
    hint = str(f.type)
    base = hint.replace(" | None", "")
    if base not in ("int", "float", "str"):
        return json.loads
    conv = {"int": int, "float": float, "str": str}[base]
    if hint == base:
        return conv
    return lambda text: None if text == "null" else conv(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polebench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name.replace("_", "-"), help=f"run the {name.replace('_', ' ')} experiment")
        p.add_argument("--config", help="flat JSON config file")
        p.add_argument("--seed", type=int, action="append", dest="seeds", help="seed (repeatable)")
        p.add_argument("--out", help="output directory")
        group = p.add_argument_group("config overrides (lists and nullable values are JSON)")
        for f in dataclasses.fields(ExperimentConfig):
            if f.name in _SPECIAL:
                continue
            group.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, type=_flag_type(f),
                               default=argparse.SUPPRESS)
    return parser


def _load_config(args) -> ExperimentConfig:
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "seeds", "out")}
    overrides["experiment"] = args.command.replace("-", "_")
    if args.seeds:
        overrides["seeds"] = args.seeds
    if args.out:
        overrides["out"] = args.out
    if args.config:
        return ExperimentConfig.from_file(args.config, **overrides)
    return ExperimentConfig.from_dict(overrides)


def main(argv: typing.Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    warnings.simplefilter("default")
    try:
        cfg = _load_config(args)
        summary = run(cfg)
    except ConfigError as exc:
        print(f"polebench: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ZeroLeadingSample as exc:
        print(f"polebench: {exc}", file=sys.stderr)
        return EXIT_ZERO_LEADING
    except RankDeficient as exc:
        print(f"polebench: {exc}", file=sys.stderr)
        return EXIT_RANK_DEFICIENT
    except (PolebenchError, OSError, ValueError) as exc:
        print(f"polebench: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"wrote {cfg.experiment} outputs to {cfg.out}")
    if isinstance(summary, dict) and "aggregate" in summary:
        for model, agg in summary["aggregate"].items():
            print(f"  {model:15s} mean BER {agg['mean_ber']:.4f} (std {agg['std_ber']:.4f})")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
