"""Command line entry point: ``fhks run|sweep|check``.

Exit codes: 0 success, 1 validation or usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunManifest, parse_config
from .domain import DomainError
from .evolution import NumericalFailure
from .operators import MeanNotZeroError
from .orchestrate import check_suite, run_manifest, sweep, write_sweep

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


def _load(args) -> RunManifest:
    text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
    m = parse_config(text)
    if args.seed is not None:
        m = dataclasses.replace(m, seed=args.seed)
    if args.out is not None:
        m = dataclasses.replace(m, output_dir=args.out)
    return m


def _cmd_run(m: RunManifest, args) -> int:
    traj = run_manifest(m)
    print(f"t={traj.final.t:.6g} steps={len(traj.diagnostics)} rejections={traj.rejections} -> {m.output_dir}")
    return EXIT_OK


def _cmd_sweep(m: RunManifest, args) -> int:
    if m.sweep_axis is None:
        raise ConfigError("sweep.axis is not set in the manifest")
    rows = sweep(m, threads=args.threads)
    out = Path(m.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_sweep(rows, out / "sweep.csv")
    failed = [r for r in rows if r.status != "ok"]
    for r in rows:
        print(f"{m.sweep_axis}={r.value:g} mass={r.mass:.12g} l1_ref={r.l1_to_reference:.4e} {r.status}")
    return EXIT_NUMERICAL if failed else EXIT_OK


def _cmd_check(m: RunManifest, args) -> int:
    results = check_suite(m, seed=args.seed)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fhks", description="Fractional chemotaxis conservation-law solver")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("run", "run one manifest and write series and snapshots"),
        ("sweep", "run the manifest's [sweep] axis and write sweep.csv"),
        ("check", "run the invariant suite on the manifest's parameters"),
    ):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="manifest file; omitted means all defaults")
        sp.add_argument("--out", help="output directory, overrides output.dir")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for sweep rows")
        sp.add_argument("--seed", type=int, help="seed for random presets, overrides initial.seed")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    handlers = {"run": _cmd_run, "sweep": _cmd_sweep, "check": _cmd_check}
    try:
        m = _load(args)
        return handlers[args.command](m, args)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, DomainError, MeanNotZeroError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
