"""Command line entry point: ``peg-sim run | sweep | verify``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from ..errors import ConfigInvalid, InvariantViolation
from .config import golden_names, golden_path
from .runner import run, sweep
from .verify import verify

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _config_arg(text: str) -> Path:
    p = Path(text)
    if not p.exists() and text in golden_names():
        return golden_path(text)
    return p


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="peg-sim", description="Pegged-asset exchange simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario")
    r.add_argument("--config", required=True, type=_config_arg, help="scenario JSON (or a golden scenario name)")
    r.add_argument("--seed", type=_u64, help="override the scenario seed")
    r.add_argument("--out", required=True, type=Path, help="output directory")
    r.add_argument("--no-record", action="store_true", help="omit balance-change events")

    s = sub.add_parser("sweep", help="run a parameter grid")
    s.add_argument("--config", required=True, type=_config_arg)
    s.add_argument("--param", action="append", default=[], help="path=lo:hi:step or path=v1,v2 (repeatable)")
    s.add_argument("--seeds", help="seed range lo:hi (half-open) or comma list")
    s.add_argument("--out", type=Path, help="write per-point outputs and sweep.json here")
    s.add_argument("--workers", type=int, default=os.cpu_count() or 1)

    v = sub.add_parser("verify", help="replay a run directory and re-check invariants")
    v.add_argument("--out", required=True, type=Path, help="run directory, or a parent when --golden is set")
    v.add_argument("--golden", action="store_true", help="first run every golden scenario into --out/<name>")
    return ap


def _seeds(text: Optional[str]) -> Optional[List[int]]:
    if not text:
        return None
    if ":" in text:
        lo, hi = text.split(":")
        return list(range(int(lo), int(hi)))
    return [int(x) for x in text.split(",")]


def _verify_dirs(dirs: List[Path]) -> int:
    worst = EXIT_OK
    for d in dirs:
        bad = verify(d)
        for v in bad:
            print(f"{d}: {v}", file=sys.stderr)
        print(f"{d}: {'OK' if not bad else f'{len(bad)} violation(s)'}")
        if bad:
            worst = EXIT_INVARIANT
    return worst


def main(argv: Optional[List[str]] = None) -> int:
    level = os.environ.get("PEG_SIM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            res = run(args.config, args.out, seed=args.seed, record=False if args.no_record else None)
            s = res.summary
            print(json.dumps({k: s[k] for k in ("name", "seed", "restoration_time", "max_abs_d",
                                                 "liquidation_count", "minted_exm", "solvency_violation")}))
            return EXIT_OK
        if args.command == "sweep":
            rows = sweep(args.config, args.param, args.out, workers=args.workers, seeds=_seeds(args.seeds))
            for row in rows:
                print(json.dumps(row, sort_keys=True))
            return EXIT_OK
        if args.golden:
            dirs = []
            for name in golden_names():
                d = args.out / name
                run(golden_path(name), d, record=True)
                dirs.append(d)
            return _verify_dirs(dirs)
        if not (args.out / "events.jsonl").exists():
            print(f"{args.out}: not a run directory", file=sys.stderr)
            return EXIT_CONFIG
        return _verify_dirs([args.out])
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
