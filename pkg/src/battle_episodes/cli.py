"""Command line: ``run``, ``scenario`` and ``summarize``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import CONDITIONS, ConfigError, ExperimentConfig, load_config
from .harness import SCENARIOS, run_experiment, run_scenario, summarize, write_scenario


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="battle-episodes", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the seeded two-condition experiment")
    run.add_argument("--config", type=Path, help="INI config file (defaults when omitted)")
    run.add_argument("--condition", choices=CONDITIONS, help="run a single condition")
    run.add_argument("--seed-offset", type=int, default=0, help="added to every configured seed")
    run.add_argument("--out", type=Path, help="output directory (config output_dir when omitted)")

    sc = sub.add_parser("scenario", help="replay a scripted siege")
    sc.add_argument("--name", choices=sorted(SCENARIOS), default="three-attacker")
    sc.add_argument("--condition", choices=CONDITIONS, required=True)
    sc.add_argument("--out", type=Path, required=True)

    sm = sub.add_parser("summarize", help="rebuild summary.csv from a run directory")
    sm.add_argument("--in", dest="indir", type=Path, required=True)
    return p


def _print_table(rows: list[dict]) -> None:
    if not rows:
        return
    keys = list(rows[0])
    print(",".join(keys))
    for r in rows:
        print(",".join(str(r[k]) for k in keys))


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "run":
            cfg = load_config(args.config) if args.config else ExperimentConfig()
            out = args.out or Path(cfg.output_dir)
            conditions = [args.condition] if args.condition else None
            results = run_experiment(cfg, out, conditions, args.seed_offset)
            _print_table(summarize(out))
            return 1 if any(r.error for r in results) else 0
        if args.command == "scenario":
            result = run_scenario(args.name, args.condition)
            write_scenario(result, args.out)
            for case in result.cases:
                meta = case.metadata
                print(f"{case.name} {case.outcome} facts={case.fact_count} "
                      f"turns={meta['start_turn']}-{meta['end_turn']} participants={meta['participants']}")
            return 0
        _print_table(summarize(args.indir))
        return 0
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
