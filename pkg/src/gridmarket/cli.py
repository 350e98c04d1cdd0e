"""Command line interface.

    gridmarket run SCENARIO [--no-p2p] [--seed N] [--out-dir DIR] [--check] [--fd-oracle-sample N]
    gridmarket compare SCENARIO [--seed N] [--out-dir DIR]
    gridmarket check SCENARIO [--seed N] [--fd-oracle-sample N]
    gridmarket list

SCENARIO is a path to a scenario JSON file or the name of a bundled one.
Exit status: 0 ok, 2 parse error, 3 validation error, 4 solver error,
5 invariant breach (check mode).
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .checks import run_checks
from .errors import InvariantBreach, ScenarioParseError, SolverError, ValidationError
from .report import write_comparison, write_run
from .scenario_io import list_bundled, load_scenario
from .simkernel import compare_runs, run_simulation

EXIT_OK, EXIT_PARSE, EXIT_VALIDATION, EXIT_SOLVER, EXIT_BREACH = 0, 2, 3, 4, 5


def _parser():
    p = argparse.ArgumentParser(prog="gridmarket", description="P2P energy market simulator on radial feeders")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp):
        sp.add_argument("scenario", help="scenario JSON path or bundled scenario name")
        sp.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        sp.add_argument("--solver", choices=("socp", "lp"), default=None, help="override the dispatch solver")

    run = sub.add_parser("run", help="simulate a scenario and write the report")
    common(run)
    run.add_argument("--no-p2p", action="store_true", help="disable the P2P market")
    run.add_argument("--out-dir", default="out", help="report directory (default: out)")
    run.add_argument("--check", action="store_true", help="run the invariant battery afterwards")
    run.add_argument("--fd-oracle-sample", type=int, default=3, metavar="N",
                     help="nodes per sampled interval for the finite-difference price check")

    cmp_ = sub.add_parser("compare", help="run with and without P2P and write the paired table")
    common(cmp_)
    cmp_.add_argument("--out-dir", default="out", help="report directory (default: out)")

    chk = sub.add_parser("check", help="run the invariant battery")
    common(chk)
    chk.add_argument("--fd-oracle-sample", type=int, default=3, metavar="N")

    sub.add_parser("list", help="list bundled scenarios")
    return p


def _load(args):
    network, profiles, config = load_scenario(args.scenario)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.solver is not None:
        config = replace(config, solver=args.solver)
    return network, profiles, config


def _report_checks(results):
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_BREACH


def cmd_run(args):
    network, profiles, config = _load(args)
    if args.no_p2p:
        config = config.with_p2p(False)
    records = run_simulation(network, profiles, config)
    summary = write_run(args.out_dir, records, config, network, scenario_id=config.name)
    print(f"{config.name}: {len(records)} intervals, mean RI {summary['mean_ri']:.2f}%, "
          f"min RI {summary['min_ri']:.2f}%, report in {args.out_dir}")
    if args.check:
        return _report_checks(run_checks(network, profiles, config, records, args.fd_oracle_sample))
    return EXIT_OK


def cmd_compare(args):
    network, profiles, config = _load(args)
    with_p2p = run_simulation(network, profiles, config.with_p2p(True))
    without = run_simulation(network, profiles, config.with_p2p(False))
    out = Path(args.out_dir)
    write_run(out / "with_p2p", with_p2p, config.with_p2p(True), network, config.name)
    write_run(out / "without_p2p", without, config.with_p2p(False), network, config.name)
    rows = compare_runs(with_p2p, without)
    write_comparison(out / "comparison.csv", rows)
    gain = [r for r in rows if r.ri_delta > 0]
    print(f"{config.name}: RI gain in {len(gain)} of {len(rows)} intervals, report in {out}")
    return EXIT_OK


def cmd_check(args):
    network, profiles, config = _load(args)
    return _report_checks(run_checks(network, profiles, config, fd_sample=args.fd_oracle_sample))


def cmd_list(args):
    for name in list_bundled():
        print(name)
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "compare": cmd_compare, "check": cmd_check, "list": cmd_list}[args.cmd]
    try:
        return handler(args)
    except ScenarioParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except InvariantBreach as exc:
        print(f"invariant breach: {exc}", file=sys.stderr)
        return EXIT_BREACH


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
