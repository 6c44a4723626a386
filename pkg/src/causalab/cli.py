"""Command-line scenario runner.

Examples
--------
List the built-in scenarios::

    causalab --list

Run the confounding scenario with a smaller sample::

    causalab --scenario confounding-s1 --n 20000 --seed 3 --out runs/s1
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from .scenarios import ESTIMATORS, OUT_ENV, ScenarioConfig, list_scenarios, parse_config, run_scenario
from .specio import SpecError


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="causalab",
        description="Run a built-in scenario or a system file and write estimates.",
        epilog=f"Default output root comes from ${OUT_ENV} (else ./causalab-out).",
    )
    src = p.add_mutually_exclusive_group()
    src.add_argument("--scenario", help="built-in scenario name (see --list)")
    src.add_argument("--spec", help="path to a system file")
    p.add_argument("--list", action="store_true", help="list built-in scenarios and exit")
    p.add_argument("--json", action="store_true", help="with --list, emit JSON")
    p.add_argument("--config", help="key=value file; flags override its values")
    p.add_argument("--n", type=int, help="sample size")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--estimators",
                   help=f"comma-separated subset of {','.join(ESTIMATORS)}")
    p.add_argument("--weight-cap", type=float, help="cap stabilized weights at this value")
    p.add_argument("--workers", type=int, help="threads used for sampling and bootstrap")
    p.add_argument("--bootstrap", type=int, help="bootstrap replicates for intervals (>= 100)")
    p.add_argument("--export-data", action="store_true", default=None,
                   help="also write the simulated records")
    return p


def _print_listing(as_json: bool) -> None:
    rows = list_scenarios()
    if as_json:
        sys.stdout.write(json.dumps(rows, indent=2) + "\n")
        return
    width = max(len(r["name"]) for r in rows)
    for r in rows:
        sys.stdout.write(f"{r['name']:<{width}}  [{r['tag']}]  {r['description']}\n")


def config_from_args(args: argparse.Namespace) -> ScenarioConfig:
    values: dict = {}
    if args.config:
        values.update(parse_config(Path(args.config).read_text(encoding="utf-8")))
    for f in fields(ScenarioConfig):
        v = getattr(args, f.name, None)
        if v is None:
            continue
        if f.name == "estimators":
            v = tuple(e.strip() for e in v.split(",") if e.strip())
        values[f.name] = v
    return ScenarioConfig(**values)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list:
        _print_listing(args.json)
        return 0
    try:
        cfg = config_from_args(args)
        label = cfg.scenario or cfg.spec or "?"
        out = run_scenario(cfg)
    except SpecError as e:
        for d in getattr(e, "diagnostics", ()) or ():
            sys.stderr.write(f"causalab: {d}\n")
        sys.stderr.write(f"causalab: error: {e}\n")
        return 2
    except (OSError, ValueError, KeyError, ArithmeticError, RuntimeError) as e:
        where = locals().get("label")
        ctx = f" in scenario {where}" if where else ""
        sys.stderr.write(f"causalab: error{ctx}: {e}\n")
        return 1
    sys.stdout.write(f"{out}\n")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
