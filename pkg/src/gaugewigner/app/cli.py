"""Command-line entry point.

Exit codes: 0 pass, 1 verification failure, 2 usage/config error,
3 numerical instability, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

from ..evolve import NumericalInstability
from .commands import EXPORTS, OUTPUT_ENV, RunNotFound, cmd_export, cmd_run, cmd_verify
from .config import ConfigError
from .suites import SUITES

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gaugewigner",
        description="Gauge-invariant Wigner phase-space dynamics: runs, verification, export.",
        epilog=f"Output root: ${OUTPUT_ENV} (default: current directory).")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    p.add_argument("--output-root", default=None, help=f"override ${OUTPUT_ENV}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario from a JSON config")
    r.add_argument("config")
    v = sub.add_parser("verify", help="run a named verification suite")
    v.add_argument("suite", choices=sorted(SUITES))
    e = sub.add_parser("export", help="export CSV/PNG/binary views of a completed run")
    e.add_argument("run_dir")
    e.add_argument("what", choices=EXPORTS)
    e.add_argument("--index", type=int, default=-1, help="snapshot index (default: last)")
    e.add_argument("--r0", type=float, nargs="+", default=None,
                   help="position of the momentum slice (default: initial centre)")
    return p


def _print_checks(manifest) -> None:
    for c in manifest.checks:
        status = "PASS" if c["passed"] else "FAIL"
        val = "nan" if c["value"] is None else f"{c['value']:.3e}"
        print(f"{status}  {c['name']:<40s} {val:>10s}  tol {c['tol']:.1e}  {c['detail']}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            manifest, path = cmd_run(args.config, args.output_root)
            _print_checks(manifest)
            print(f"run directory: {path}")
            return EXIT_OK if manifest.passed else EXIT_FAIL
        if args.command == "verify":
            manifest, path = cmd_verify(args.suite, args.output_root)
            _print_checks(manifest)
            print(f"manifest: {path / 'manifest.json'}")
            return EXIT_OK if manifest.passed else EXIT_FAIL
        files = cmd_export(args.run_dir, args.what, args.index, args.r0)
        for f in files:
            print(f)
        return EXIT_OK
    except (ConfigError, RunNotFound) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalInstability as exc:
        print(f"numerical instability: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
