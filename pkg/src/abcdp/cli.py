"""Command-line entry point: ``abcdp <subcommand> --config PATH [...]``.

Exit status is 0 on success, 2 for invalid input and 3 for failures during a run.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .config import ConfigError, apply_overrides, config_from_dict, load_config
from .io import read_json

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3

# subcommand -> mode it forces (None keeps the configured mode)
SUBCOMMAND_MODES = {"run": None, "benchmark": "paired_benchmark", "flip-grid": "flip_grid", "bounds": "bounds_report"}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abcdp", description="Differentially private ABC experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMAND_MODES:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "flip-grid", type=Path)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", type=Path, default=Path("out"))
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
        p.add_argument("--save-proposals", type=Path, metavar="DIR",
                       help="also persist the proposal set for reuse via the 'proposals' field")
    p = sub.add_parser("emit-plots")
    p.add_argument("--results", required=True, type=Path, help="results.json or the directory holding it")
    p.add_argument("--kind", required=True, choices=sorted(harness.PLOT_KINDS))
    p.add_argument("--out", type=Path, default=None)
    return parser


def _load(args, forced_mode: str | None):
    overrides = list(args.override)
    if forced_mode is not None:
        overrides.append(f"mode={forced_mode}")
    if args.config is None:
        raw = apply_overrides({"mode": forced_mode}, overrides)
        if args.seed is not None:
            raw["master_seed"] = args.seed
        return config_from_dict(raw)
    return load_config(args.config, overrides, args.seed)


def _print_ledger(results: dict) -> None:
    ledgers = results.get("ledgers") or ([results["ledger"]] if "ledger" in results else [])
    for ledger in ledgers:
        plain = {k: ("inf" if v == float("inf") else v) for k, v in ledger.items()}
        print("budget ledger: " + json.dumps(plain, sort_keys=True))


def _emit(args) -> int:
    path = args.results / "results.json" if args.results.is_dir() else args.results
    if not path.exists():
        print(f"error: --results: file not found: {path}", file=sys.stderr)
        return EXIT_USAGE
    out = args.out or path.parent
    try:
        written = harness.emit_plot_data(read_json(path), args.kind, out)
    except (harness.UsageError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(written)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "emit-plots":
        return _emit(args)
    try:
        config = _load(args, SUBCOMMAND_MODES[args.command])
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        results = harness.run(config)
        harness.write_artifacts(config, results, args.out)
        if args.save_proposals is not None and config.simulator is not None:
            harness.export_proposals(config, args.save_proposals)
    except Exception as exc:  # noqa: BLE001 - any failure after validation is a runtime error
        logging.getLogger(__name__).debug("run failed", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _print_ledger(results)
    print(f"wrote {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
