"""Command-line driver: batch pipelines over scenario files."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .runner import COMMANDS, default_threads, run
from .scenario import PRESETS, ScenarioError, load_scenario, save_scenario


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alignmfg",
        description="Velocity-alignment mean-field game laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", help="scenario JSON file")
        p.add_argument("--out", help="artifact directory")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--threads", type=int,
                       help=f"worker threads (default: env or machine count)")

    p = sub.add_parser("preset", help="write a built-in scenario file")
    p.add_argument("--name", required=True, choices=sorted(PRESETS))
    p.add_argument("--out", required=True, help="output JSON path")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "preset":
        save_scenario(PRESETS[args.name](), args.out)
        print(f"wrote preset {args.name!r} to {args.out}")
        return 0

    scen = None
    if args.scenario:
        try:
            scen = load_scenario(args.scenario)
        except ScenarioError as exc:
            print(f"scenario error: {exc}", file=sys.stderr)
            return 2
    if scen is not None and args.seed is not None:
        scen = replace(scen, seed=args.seed)

    threads = args.threads or default_threads()
    try:
        art = run(scen, args.command, out_dir=args.out, threads=threads)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    for key in ("energy", "grad_norm", "termination", "max_rel_error",
                "picard_converged", "l1_final", "segregation_initial",
                "segregation_final"):
        if key in art.report:
            print(f"{key}: {art.report[key]}")
    if "diagnostics" in art.report:
        dd = art.report["diagnostics"]
        if "exploitability" in dd:
            print(f"max_relative_gap: {dd['exploitability']['max_relative_gap']}")
        if "bounds_audit" in dd:
            bad = [r["name"] for r in dd["bounds_audit"] if not r["passed"]]
            print(f"bounds_audit: {'ok' if not bad else 'FAILED ' + str(bad)}")
    for name, path in sorted(art.files.items()):
        print(f"wrote {name}: {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
