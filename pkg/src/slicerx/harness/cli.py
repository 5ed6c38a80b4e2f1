"""Command line entry point.

Exit codes: 0 success, 1 selftest failure, 2 at least one failed sweep
point, 3 configuration error.
"""

import argparse
import logging
import sys

from .config import CANNED, PAPER_SCALE, ConfigError, load_config
from .emit import emit
from .runner import failed, run_sweep
from .selftest import run_selftest

EXIT_OK, EXIT_SELFTEST, EXIT_FAILED_POINT, EXIT_CONFIG = 0, 1, 2, 3

log = logging.getLogger("slicerx")


def _sweep_options(p):
    p.add_argument("--out", "-o", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--jobs", "-j", type=int, default=1, help="worker processes")
    p.add_argument("--paper-scale", action="store_true", help="200k symbols x 10 measurements")
    p.add_argument("--symbols", type=int, help="override symbols per measurement")
    p.add_argument("--measurements", type=int, help="override measurement count")
    p.add_argument("--base-seed", type=int, help="override the base seed")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any config field by dotted path, e.g. receiver.deskew=false",
    )
    p.add_argument("--no-timing", action="store_true", help="leave wall_s empty so output files are reproducible")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="slicerx", description="Sliced IM-DD receiver simulations and equalizer sweeps.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a sweep from a YAML config or a canned study name")
    run.add_argument("config", help=f"YAML path or one of {', '.join(CANNED)}")
    _sweep_options(run)
    for name in CANNED:
        _sweep_options(sub.add_parser(name, help=f"canned study {name} (same as: run {name})"))
    sub.add_parser("selftest", help="run the built-in oracle checks")
    return parser


def _overrides(args):
    pairs = []
    if args.paper_scale:
        pairs += list(PAPER_SCALE.items())
    for flag, key in (("symbols", "symbols"), ("measurements", "measurements"), ("base_seed", "base_seed")):
        value = getattr(args, flag)
        if value is not None:
            pairs.append((key, value))
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        pairs.append((key.strip(), value))
    return pairs


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        return EXIT_OK if run_selftest(sys.stdout) else EXIT_SELFTEST
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    source = args.config if args.command == "run" else args.command
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cfg = load_config(source, _overrides(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    records = run_sweep(cfg, jobs=args.jobs)
    text = emit(records, args.format, args.out, timing=not args.no_timing)
    if args.out is None:
        sys.stdout.write(text)
    bad = failed(records)
    if bad:
        print(f"{len(bad)} record(s) failed; see the error column", file=sys.stderr)
        return EXIT_FAILED_POINT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
