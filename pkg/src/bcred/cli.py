"""Command-line entry point.

Exit codes: 0 success, 2 config error, 3 validation error, 4 check failures.
"""

import argparse
import sys

from .checks import SCOPES, format_report, report_failed, run_checks
from .config import generate_matrix, load_config, run_experiment, run_denoise
from .exceptions import BCREDError, ConfigError
from .io import format_float
from .metrics import snr_db

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_CHECKS = 4


def _cmd_run(args):
    cfg = load_config(args.config)
    res = run_experiment(cfg)
    for k, v in res.results.items():
        print(f"{k} = {v if isinstance(v, (str, bool, int)) else format_float(v)}")
    return EXIT_OK


def _cmd_denoise(args):
    cfg = load_config(args.config)
    out, noisy, x_true = run_denoise(cfg)
    print(f"input_snr_db = {format_float(snr_db(noisy, x_true))}")
    print(f"output_snr_db = {format_float(snr_db(out, x_true))}")
    return EXIT_OK


def _cmd_check(args):
    try:
        results = run_checks(args.scope, include_fixtures=args.include_fixtures)
    except ValueError as exc:
        raise ConfigError(str(exc), key="scope") from exc
    sys.stdout.write(format_report(results))
    return EXIT_CHECKS if report_failed(results) else EXIT_OK


def _cmd_genmat(args):
    m, n = generate_matrix(args.spec, args.out)
    print(f"wrote {m}x{n} matrix to {args.out}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="bcred", description="Block-coordinate RED toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.set_defaults(func=_cmd_run)

    c = sub.add_parser("check", help="run the property-check suite")
    c.add_argument("scope", nargs="?", default=None,
                   help=f"comma-separated scopes from: {', '.join(SCOPES)} (default: all)")
    c.add_argument("--include-fixtures", action="store_true",
                   help="also run expected-failure fixtures")
    c.set_defaults(func=_cmd_check)

    d = sub.add_parser("denoise", help="apply the configured denoiser once")
    d.add_argument("config")
    d.set_defaults(func=_cmd_denoise)

    g = sub.add_parser("genmat", help="write a matrix file")
    g.add_argument("spec", help="radon:N:ANGLES, gaussian:M:N:SEED or identity:N")
    g.add_argument("out")
    g.set_defaults(func=_cmd_genmat)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BCREDError, ValueError, OSError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
