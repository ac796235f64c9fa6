"""Command-line front end.

Exit codes: 0 on success, 1 for configuration problems (bad file, unknown
keys, invalid values), 2 when the campaign ran but some cells failed at
runtime (e.g. a singular update system) and were skipped.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import (
    DEFAULT_SEED,
    ConfigError,
    Options,
    load_config,
    run_design,
    run_experiment,
    run_measure,
)

_RUNNERS = ("run", "grid", "approx-sweep", "n-sweep", "opcounts")

#: subcommand -> (config section, default experiment name)
_SECTION = {
    "run": ("run", None),
    "grid": ("grid", "grid"),
    "approx-sweep": ("approx_sweep", "approx_sweep"),
    "n-sweep": ("n_sweep", "nsweep"),
    "opcounts": ("opcounts", "opcounts"),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="farrow-sync",
        description="Sampling-offset estimation and compensation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("design", "measure") + _RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None, help="flat key = value config file")
        p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
        if name in _RUNNERS:
            p.add_argument("--full", action="store_true", help="full-scale trial counts")
            p.add_argument("--seed", type=int, default=None, help="base seed override")
    return parser


def _section_options(args, section: str) -> Options:
    if args.config is None:
        return Options({}, section)
    sections = load_config(args.config)
    return Options(sections.get(section, {}), section)


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "design":
            outcome = run_design(_section_options(args, "design"), args.out)
        elif args.command == "measure":
            outcome = run_measure(_section_options(args, "measure"), args.out)
        else:
            section, default_experiment = _SECTION[args.command]
            options = _section_options(args, section)
            experiment = options.get_str("experiment", default_experiment)
            if experiment is None:
                raise ConfigError("[run] requires an experiment = <name> entry")
            seed = args.seed
            if seed is None:
                seed = options.get_int("seed", DEFAULT_SEED)
            outcome = run_experiment(experiment, options, seed, args.full, args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in outcome.files:
        print(f"wrote {path}")
    if outcome.failures:
        print(f"warning: {outcome.failures} cell(s) failed and were skipped", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
