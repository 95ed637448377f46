"""Command-line experiment runner.

Subcommands:

* ``run --config cfg.json [--out DIR]``  -- execute a seeded experiment,
  write per-seed CSV traces, an aggregate CSV and a JSON report; exit 0
  if all bound verdicts pass, 1 if any fails, 2 on execution errors.
* ``check --trace t.csv --bound b.json`` -- evaluate a bound spec
  against an existing trace.
* ``list-algorithms``                    -- print the runner registry.

The output root defaults to $ACCOPT_OUTPUT_ROOT, falling back to
``./results``.
"""

import argparse
import json
import os
import sys

from .errors import AccoptError
from .harness import check_bound, list_algorithms, run_experiment
from .trace import read_json, read_trace

__all__ = ["main"]

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def _output_root(args):
    if args.out:
        return args.out
    return os.environ.get("ACCOPT_OUTPUT_ROOT", os.path.join(os.curdir, "results"))


def _cmd_run(args):
    config = read_json(args.config)
    report = run_experiment(config, _output_root(args))
    print(json.dumps(report, indent=2, sort_keys=True))
    if report["failures"]:
        return EXIT_ERROR if not report["verdicts"] else EXIT_FAIL
    return EXIT_PASS if report["passed"] else EXIT_FAIL


def _cmd_check(args):
    rows = read_trace(args.trace)
    bound = read_json(args.bound)
    verdict = check_bound(rows, bound)
    print(json.dumps(verdict, indent=2, sort_keys=True))
    return EXIT_PASS if verdict["passed"] else EXIT_FAIL


def _cmd_list(_args):
    for name in list_algorithms():
        print(name)
    return EXIT_PASS


def build_parser():
    parser = argparse.ArgumentParser(
        prog="accopt", description="seeded optimization experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None,
                       help="output directory (default $ACCOPT_OUTPUT_ROOT "
                            "or ./results)")
    p_run.set_defaults(func=_cmd_run)

    p_check = sub.add_parser("check", help="check a bound against a trace")
    p_check.add_argument("--trace", required=True)
    p_check.add_argument("--bound", required=True)
    p_check.set_defaults(func=_cmd_check)

    p_list = sub.add_parser("list-algorithms", help="print available runners")
    p_list.set_defaults(func=_cmd_list)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (AccoptError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
