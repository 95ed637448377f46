"""Command-line entry point: ``plots render --spec <json>``."""

import argparse
import json
import sys

from traceplots.plotting import PlotError, render, spec_from_dict


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="plots", description="Render figures from benchmark CSV traces.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_render = sub.add_parser("render", help="render one figure from a JSON spec")
    p_render.add_argument("--spec", required=True,
                          help="path to a JSON plot specification")
    args = parser.parse_args(argv)

    try:
        with open(args.spec, encoding="utf-8") as fh:
            spec = spec_from_dict(json.load(fh))
        out = render(spec)
    except (PlotError, OSError, json.JSONDecodeError, TypeError) as exc:
        print("plots: error: %s" % exc, file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
