"""Command-line interface.

Subcommands: synth (emit a synthetic profile), simulate (roll a fixed
policy), train (run a training preset), evaluate (score saved weights),
compare-estimators (the estimator race). Failures exit nonzero with a
machine-readable error record on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback

from .config import load_config
from .runner import run_evaluate, run_preset, run_simulate, run_synth


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="YAML configuration file")
    parser.add_argument("--seed", type=int, metavar="N", help="master seed override")
    parser.add_argument("--out", metavar="DIR", help="output directory override")
    parser.add_argument("--preset", metavar="NAME", help="configuration preset")
    parser.add_argument("--no-figures", action="store_true", help="skip figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="besslab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="emit a synthetic profile CSV")
    _common(p)
    p.add_argument("--season", choices=("spring", "summer", "autumn", "winter"))
    p.add_argument("--days", type=int)

    p = sub.add_parser("simulate", help="roll a fixed policy over a profile")
    _common(p)
    p.add_argument("--policy", default="zero", help="zero or constant:<kw>")

    p = sub.add_parser("train", help="train a preset (proposed, no-rules-n4, rules-n1)")
    _common(p)

    p = sub.add_parser("evaluate", help="greedy evaluation of saved weights")
    _common(p)
    p.add_argument("--weights", required=True, metavar="PATH")

    p = sub.add_parser("compare-estimators", help="estimator race on the desk instance")
    _common(p)
    return parser


def _config_from(args: argparse.Namespace):
    overrides: dict = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.no_figures:
        overrides["figures"] = False
    if getattr(args, "season", None) is not None:
        overrides.setdefault("profile", {})["season"] = args.season
    if getattr(args, "days", None) is not None:
        overrides.setdefault("profile", {})["days"] = args.days
    preset = args.preset
    if args.command == "compare-estimators" and preset is None:
        preset = "baseline-race"
    return load_config(args.config, preset=preset, overrides=overrides)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from(args)
        if args.command == "synth":
            art = run_synth(cfg)
        elif args.command == "simulate":
            art = run_simulate(cfg, args.policy)
        elif args.command == "train":
            art = run_preset(cfg)
        elif args.command == "evaluate":
            art = run_evaluate(cfg, args.weights)
        elif args.command == "compare-estimators":
            art = run_preset(cfg)
        else:  # pragma: no cover - argparse enforces the choices
            raise ValueError(f"unknown command {args.command!r}")
    except Exception as exc:
        record = {
            "error": type(exc).__name__,
            "message": str(exc),
            "command": args.command,
            "traceback": traceback.format_exc(limit=5),
        }
        print(json.dumps(record), file=sys.stderr)
        return 1
    for name, path in sorted(art.files.items()):
        print(f"{name}\t{path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
