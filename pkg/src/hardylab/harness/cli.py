"""Command line entry point: ``hardylab run|check|cache-gc``."""

import argparse
import logging
import sys

from hardylab.harness import config as cfgmod
from hardylab.harness.cache import Cache, cache_gc, default_root

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _parser():
    ap = argparse.ArgumentParser(prog="hardylab", description="Hardy inequality laboratory experiments.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, text in (("run", "run a suite and write its report"),
                       ("check", "run a suite and print verdicts; writes nothing unless --out is given")):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--suite", help="|".join(cfgmod.SUITES) + " (geometry = geometry-checks)")
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--depth", type=int, help="single prefractal depth")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--no-cache", action="store_true", help="neither read nor write the task cache")
    gc = sub.add_parser("cache-gc", help="delete cache entries")
    gc.add_argument("--dir", default=None, help="cache root (default: $HARDYLAB_CACHE or ~/.cache/hardylab)")
    gc.add_argument("--policy", choices=("unreferenced", "all"), default="unreferenced")
    gc.add_argument("--reports", nargs="*", default=(), help="report directories whose entries are kept")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "cache-gc":
        freed = cache_gc(args.dir, args.policy, args.reports)
        print(f"freed {freed} bytes from {args.dir or default_root()}")
        return EXIT_PASS
    try:
        user = cfgmod.load(args.config) if args.config else {}
        cfg = cfgmod.resolve(user, {"suite": args.suite, "out": args.out, "depth": args.depth,
                                    "seed": args.seed, "workers": args.workers})
    except cfgmod.ConfigError as err:
        print(err, file=sys.stderr)
        return EXIT_CONFIG
    from hardylab.harness.run import run

    write = args.command == "run" or args.out is not None
    report = run(cfg, Cache(enabled=not args.no_cache), write=write)
    for line in report.summary_lines():
        print(line)
    if write:
        print(f"report written to {cfg['out']}/{cfg['suite']}")
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
