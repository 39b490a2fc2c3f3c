"""Command line: ``emloc <kind> --config FILE [--out DIR] [--set section.key=value ...]``.

Exit status: 0 success, 1 failed internal check, 2 configuration or usage
error, 3 numerical error (resonance, eigensolver, empty region, ...),
4 file I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import KINDS, load_config
from .errors import ConfigError, EmlocError, OutputError
from .experiments import run_experiment

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4


def build_parser():
    p = argparse.ArgumentParser(prog="emloc", description="Localized electromagnetic fields with partial boundary data.")
    p.add_argument("kind", choices=KINDS, help="experiment to run")
    p.add_argument("--config", required=True, help="configuration file")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override a configuration key; may be repeated")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config).with_overrides([f"experiment.kind={args.kind}", *args.overrides])
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"emloc: config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rep = run_experiment(cfg, args.out)
    except ConfigError as exc:
        print(f"emloc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OutputError, OSError) as exc:
        print(f"emloc: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except EmlocError as exc:
        print(f"emloc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"{rep.kind}: wrote {rep.csv_path}" + (f" and {rep.vtk_path}" if rep.vtk_path else ""))
    for key, value in rep.summary.items():
        print(f"  {key} = {value}")
    for failure in rep.failures:
        print(f"emloc: check failed: {failure}", file=sys.stderr)
    return EXIT_CHECK if rep.failures else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
