"""Command-line entry point: ``dngbrane run|verify|list-scenarios``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .errors import ConfigError
from .scenarios_cli import list_scenarios, load_config, run, verify


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dngbrane", description="Canonical p-brane evolution and checks")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "evolve a configured scenario and write its outputs"),
                        ("verify", "run a scenario plus the acceptance criteria it enables")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="path to a TOML config")
        p.add_argument("--out", help="output directory (overrides [output].dir)")
        p.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
        p.add_argument("--tol-scale", type=float, default=1.0, help="multiply every tolerance")
    sub.add_parser("list-scenarios", help="print the built-in scenarios")
    return ap


def _print_checks(checks) -> None:
    for c in checks:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"  [{status}] {c['name']}: measured={c['measured']} tol={c.get('tolerance')}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "list-scenarios":
        for name, desc in list_scenarios():
            print(f"{name:24s} {desc}")
        return 0
    if not args.tol_scale > 0:
        print("error: --tol-scale must be positive", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)

    if args.command == "run":
        result = run(cfg, args.out, args.tol_scale)
        print(f"{cfg.scenario}: {len(result.trajectory)} records, τ_final={result.trajectory.taus[-1]:.6g}"
              + (f" (truncated: {result.trajectory.truncation_reason})" if result.trajectory.truncated else ""))
        _print_checks(result.checks)
        for kind, path in result.files.items():
            print(f"  wrote {kind}: {path}")
        return 0 if result.passed else 1

    report = verify(cfg, args.out, args.tol_scale)
    print(f"{cfg.scenario}: scenario checks")
    _print_checks(report["scenario_checks"])
    for c in report["acceptance"]:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"criterion {c['number']:2d} [{status}] {c['name']}")
    print("ALL PASSED" if report["all_passed"] else "SOME CHECKS FAILED")
    return 0 if report["all_passed"] else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
