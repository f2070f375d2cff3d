"""Run scenarios and write their output files.

Output directory layout::

    metrics.csv     one MetricsFrame per step
    events.jsonl    every event, in step order (balance changes included when recording)
    summary.json    headline results and final balances
    agents_pnl.csv  per-agent position and PnL at each swap boundary
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from ..fixed import fmt
from ..ledger import EXM
from .config import load_config, parse_range, set_path
from .metrics import MetricsFrame, max_abs_spread, restoration_time, write_csv
from .world import World

log = logging.getLogger("pegsim")


def dumps(event: dict) -> str:
    return json.dumps(event, sort_keys=True, separators=(",", ":"))


@dataclass
class RunResult:
    world: World
    frames: List[MetricsFrame]
    summary: dict
    out_dir: Optional[Path] = None


def summarize(world: World) -> dict:
    cfg = world.cfg
    m = cfg["metrics"]
    shock = int(m.get("shock_step", 0))
    rt = restoration_time(world.frames, _frac(m["epsilon"]), int(m["persistence"]), shock)
    balances: Dict[str, Dict[str, Dict[str, str]]] = {}
    snap = world.ledger.snapshot()
    for (acct, asset), (free, locked) in sorted(snap.balances.items()):
        if free or locked:
            balances.setdefault(acct, {})[asset] = {"free": fmt(free), "locked": fmt(locked)}
    return {
        "name": cfg.get("name", "scenario"),
        "seed": world.seed,
        "steps": world.steps,
        "shock_step": shock,
        "restoration_time": rt,
        "max_abs_d": fmt(max_abs_spread(world.frames, shock)),
        "final_d": fmt(world.frames[-1].d) if world.frames else "0",
        "final_r": fmt(world.funding.rate),
        "liquidation_count": world.liquidation_count,
        "liquidations": world.liquidations,
        "minted_exm": fmt(world.ledger.minted_total[EXM]),
        "solvency_violation": world.solvency_violated,
        "solvency_headroom": fmt(world.cb.solvency().headroom),
        "usde_outstanding": fmt(world.cs.token.outstanding),
        "rejections": world.rejections,
        "initial_supply": {k: fmt(v) for k, v in sorted(world.ledger.initial_supply.items())},
        "final_balances": balances,
    }


def _frac(x):
    from fractions import Fraction

    return Fraction(str(x))


def run(config: Union[str, Path, dict], out_dir: Optional[Union[str, Path]] = None, seed: Optional[int] = None,
        record: Optional[bool] = None) -> RunResult:
    cfg = load_config(config)
    if seed is not None:
        cfg["seed"] = int(seed)
    if record is not None:
        cfg["record"] = record
    world = World(cfg)
    if out_dir is None:
        world.run()
        return RunResult(world, world.frames, summarize(world))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "events.jsonl", "w") as ev:
        def write(frame, events):
            for e in events:
                ev.write(dumps(e))
                ev.write("\n")
        world.run(write)
    with open(out / "metrics.csv", "w", newline="") as fh:
        write_csv(world.frames, fh)
    with open(out / "agents_pnl.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "agent", "venue", "position", "realized", "unrealized"])
        w.writerows(world.pnl_rows)
    summary = summarize(world)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    (out / "config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
    log.info("%s: %d steps written to %s", cfg.get("name"), world.steps, out)
    return RunResult(world, world.frames, summary, out)


def _coerce(template, value: str):
    if isinstance(template, bool):
        return value.lower() in ("1", "true", "yes")
    if isinstance(template, int):
        return int(value)
    if isinstance(template, float):
        return float(value)
    return value


def _lookup(cfg: dict, dotted: str):
    node = cfg
    for k in dotted.split("."):
        node = node[int(k)] if isinstance(node, list) else node.get(k) if isinstance(node, dict) else None
        if node is None:
            return None
    return node


def _sweep_one(args: Tuple[dict, Optional[str]]) -> dict:
    cfg, out = args
    res = run(cfg, out, record=out is not None and cfg.get("record", True))
    return {k: res.summary[k] for k in ("seed", "restoration_time", "max_abs_d", "liquidation_count",
                                         "minted_exm", "solvency_violation")}


def sweep(config: Union[str, Path, dict], params: Sequence[str], out_dir: Optional[Union[str, Path]] = None,
          workers: int = 1, seeds: Optional[Sequence[int]] = None) -> List[dict]:
    """Cartesian sweep over ``path=range`` parameters; each point runs in its own process."""
    base = load_config(config)
    grid: List[Tuple[Dict[str, str], dict]] = [({}, base)]
    for item in params:
        if "=" not in item:
            from ..errors import ConfigInvalid
            raise ConfigInvalid(f"sweep parameter must look like path=range, got {item!r}")
        path, rng = item.split("=", 1)
        template = _lookup(base, path)
        grid = [({**labels, path: v}, set_path(cfg, path, _coerce(template, v)))
                for labels, cfg in grid for v in parse_range(rng)]
    jobs = []
    labels_out = []
    for i, (labels, cfg) in enumerate(grid):
        for s in (seeds if seeds is not None else [cfg["seed"]]):
            c = dict(cfg, seed=int(s))
            load_config(c)  # validate every point up front
            sub = str(Path(out_dir) / f"run{i:03d}_seed{s}") if out_dir else None
            jobs.append((c, sub))
            labels_out.append(labels)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    rows = [{**lab, **res} for lab, res in zip(labels_out, results)]
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "sweep.json").write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n")
    return rows
