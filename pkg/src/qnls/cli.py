"""Command-line entry point.

    qnls <run|sweep|classify|groundstate|fit|verify> --config PATH
         [--out DIR] [--override key=value ...]

`fit` dispatches on the config kind (fit_decay or fit_blowup_rate) and
defaults to fit_decay.  The exit status communicates the verdict class:
0 completed/pass, 2 blowup detected, 3 resolution exceeded, 1 error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .harness import (
    EXIT_ERROR,
    ConfigError,
    apply_override,
    load_config,
    parse_config,
    run_experiment,
)

_SUBCOMMAND_KINDS = {
    "run": ("run",),
    "sweep": ("sweep",),
    "classify": ("classify",),
    "groundstate": ("groundstate",),
    "fit": ("fit_decay", "fit_blowup_rate"),
    "verify": ("verify_identities",),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qnls",
        description="quasilinear Schrodinger simulation laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMAND_KINDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument(
            "--override",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="config override, repeatable",
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = load_config(args.config)
        allowed = _SUBCOMMAND_KINDS[args.command]
        if raw.get("kind") not in allowed:
            raw["kind"] = allowed[0]
        if args.out is not None:
            raw["output_dir"] = args.out
        for assignment in args.override:
            apply_override(raw, assignment)
        record = run_experiment(parse_config(raw))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    brief = {
        "kind": record.kind,
        "output_dir": str(record.output_dir),
        "exit_code": record.exit_code,
    }
    for key in ("verdict", "threshold_level", "rows"):
        if key in record.summary:
            brief[key] = record.summary[key]
    print(json.dumps(_plain(brief), indent=2))
    return record.exit_code


def _plain(obj):
    from .harness import _jsonable

    return _jsonable(obj)


if __name__ == "__main__":
    raise SystemExit(main())
