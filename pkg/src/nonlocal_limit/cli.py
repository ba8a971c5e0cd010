"""Command line: ``run``, ``validate``, ``plot`` and ``selftest``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ConfigError, load_config, validate
from .experiment import RunError, run_experiment
from .fields import NumericalError

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_CHECK = 0, 1, 2, 3


def _load(path):
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        return None, exc.errors
    except (OSError, ValueError) as exc:
        return None, [("<file>", str(exc))]
    return cfg, validate(cfg)


def _print_errors(errors):
    for path, msg in errors:
        print(f"error: {path}: {msg}", file=sys.stderr)


def cmd_validate(args) -> int:
    cfg, errors = _load(args.config)
    if errors:
        _print_errors(errors)
        return EXIT_VALIDATION
    print(f"ok: {cfg.name}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg, errors = _load(args.config)
    if errors:
        _print_errors(errors)
        return EXIT_VALIDATION
    try:
        manifest = run_experiment(cfg, output_dir=args.output, workers=args.workers)
    except (RunError, NumericalError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    run_dir = manifest["path"].rsplit("/", 1)[0]
    rep = f"{run_dir}/rate_report.txt"
    print("=" * 72)
    try:
        with open(rep) as fh:
            print(fh.read().rstrip())
    except FileNotFoundError:
        for r in manifest["runs"]:
            print(f"k={r['k']:g} sup_gap={r['sup_gap']:.6e}")
    print("=" * 72)
    if not args.no_plots:
        from .plotting import emit_plots
        for p in emit_plots(manifest["path"]):
            print(f"figure: {p}")
    print(f"manifest: {manifest['path']}")
    for name, ok in manifest["checks"].items():
        print(f"check {name}: {'pass' if ok else 'FAIL'}")
    return EXIT_OK if manifest["passed"] else EXIT_CHECK


def cmd_plot(args) -> int:
    from .plotting import emit_plots
    try:
        paths = emit_plots(args.manifest)
    except (FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    for p in paths:
        print(f"figure: {p}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selfcheck import run_all
    results = run_all()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nonlocal-limit",
                                 description="Nonlocal-to-local convergence experiments.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="output directory (default: from the config)")
    p.add_argument("-j", "--workers", type=int, default=None)
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("validate", help="check a config without running it")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)
    p = sub.add_parser("plot", help="render figures for a finished run")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_plot)
    p = sub.add_parser("selftest", help="fast invariant checks")
    p.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
