"""Command line entry point: ``slpmld ber`` and ``slpmld converge``.

Exit codes: 0 success, 2 configuration error, 3 numeric or solver failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import typing

from .errors import BudgetError, ConfigurationError, ContractError, InvalidSymbolError, NumericError
from .sim import SimConfig, export_results, run_ber_sweep, run_convergence_probe

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    hints = typing.get_type_hints(SimConfig)
    for f in dataclasses.fields(SimConfig):
        hint = hints[f.name]
        if typing.get_origin(hint) is list:
            parser.add_argument(f"--{f.name}", type=float, nargs="+", default=None)
        else:
            parser.add_argument(f"--{f.name}", type=hint, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slpmld", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("ber", "BER-vs-SNR sweep"), ("converge", "AO convergence traces")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON file with SimConfig fields")
        p.add_argument("--seed", type=int, default=None, help="alias for --master_seed")
        p.add_argument("--out", default="-", help="output path ('-' for stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        _add_config_flags(p)
        if name == "converge":
            p.add_argument("--p_list", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    return parser


def resolve_config(args: argparse.Namespace, defaults: dict | None = None) -> SimConfig:
    """Defaults, then the config file, then explicit flags, in increasing priority."""
    data: dict = dict(defaults or {})
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigurationError("config file must hold a JSON object")
        data.update(loaded)
    for f in dataclasses.fields(SimConfig):
        value = getattr(args, f.name)
        if value is not None:
            data[f.name] = value
    if args.seed is not None:
        data["master_seed"] = args.seed
    try:
        cfg = SimConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc
    return cfg.validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        defaults = {"scheme": "joint_design"} if args.command == "converge" else None
        cfg = resolve_config(args, defaults)
        if args.command == "ber":
            results = run_ber_sweep(cfg)
        else:
            if cfg.scheme != "joint_design":
                raise ConfigurationError("converge needs scheme joint_design")
            results = run_convergence_probe(cfg, args.p_list)
        out = "/dev/stdout" if args.out == "-" else args.out
        export_results(results, out, args.format)
    except (ConfigurationError, ContractError, InvalidSymbolError, BudgetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
