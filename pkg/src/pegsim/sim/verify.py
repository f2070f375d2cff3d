"""Offline replay of a run directory.

Nothing logged as a derived number is trusted: balances are rebuilt from the
balance-change events, positions from trades, and every invariant is checked
again at each step.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Tuple

from ..fixed import fmt, parse
from ..ledger import CURRENCY_SERVICE, EXM, FEE_SINK, RESERVE, USDE
from .metrics import MetricsFrame, read_csv


@dataclass(frozen=True)
class Violation:
    step: int
    check: str
    message: str

    def __str__(self) -> str:
        return f"step {self.step}: [{self.check}] {self.message}"


def _events_by_step(path: Path) -> Iterator[Tuple[int, List[dict]]]:
    current, bucket = None, []
    with open(path) as fh:
        for line in fh:
            ev = json.loads(line)
            step = ev.get("step", 0)
            if current is not None and step != current:
                yield current, bucket
                bucket = []
            current = step
            bucket.append(ev)
    if current is not None:
        yield current, bucket


def verify(out_dir) -> List[Violation]:
    out = Path(out_dir)
    bad: List[Violation] = []
    with open(out / "metrics.csv") as fh:
        frames: Dict[int, MetricsFrame] = {f.step: f for f in read_csv(fh)}
    summary = json.loads((out / "summary.json").read_text())

    balances: Dict[Tuple[str, str, str], int] = defaultdict(int)
    supply: Dict[str, int] = defaultdict(int)
    net_qty: Dict[str, int] = defaultdict(int)
    saw_balances = False

    for step, events in _events_by_step(out / "events.jsonl"):
        moves: Dict[str, int] = defaultdict(int)
        sink: Dict[str, int] = defaultdict(int)
        reserve: Dict[str, int] = defaultdict(int)
        fees = rebates = conv_fees = slashes = rewards = 0
        swaps: List[dict] = []
        for ev in events:
            kind = ev.get("type")
            if kind == "balance":
                saw_balances = True
                d = parse(ev["delta"])
                balances[(ev["account"], ev["asset"], ev["bucket"])] += d
                if ev["op"] == "move":
                    moves[ev["asset"]] += d
                else:
                    supply[ev["asset"]] += d
                if ev["account"] == FEE_SINK and ev["asset"] == EXM:
                    sink[ev["reason"]] += d
                if ev["account"] == RESERVE and ev["asset"] == EXM:
                    reserve[ev["reason"]] += d
            elif kind == "trade":
                q = parse(ev["qty"])
                net_qty[ev["buyer"]] += q
                net_qty[ev["seller"]] -= q
                for f in (parse(ev["buy_fee"]), parse(ev["sell_fee"])):
                    if f > 0:
                        fees += f
                    else:
                        rebates -= f
            elif kind == "funding":
                swaps.append(ev)
            elif kind == "conversion" and ev["status"] == "done":
                conv_fees += parse(ev["fee"])
            elif kind == "oracle":
                slashes += sum(parse(v) for v in ev["slashes"].values())
                rewards += sum(parse(v) for v in ev["rewards"].values())

        for ev in swaps:
            amounts = sum(parse(a) for _, a in ev["transfers"])
            shortfall, remainder = parse(ev["shortfall"]), parse(ev["remainder"])
            if amounts + remainder - shortfall != 0:
                bad.append(Violation(step, "swap-zero-sum", "transfers, shortfall and remainder do not net to zero"))
            if reserve["swap_shortfall"] != -shortfall:
                bad.append(Violation(step, "swap-zero-sum", "Reserve shortfall payment does not match"))
            if sink["swap_remainder"] != remainder:
                bad.append(Violation(step, "swap-zero-sum", "FeeSink remainder does not match"))

        # ledger identity: transfers net to zero, supply moves only by mint/burn, no negatives
        for asset, total in sorted(moves.items()):
            if total:
                bad.append(Violation(step, "ledger", f"{asset} transfers net to {fmt(total)}"))
        for key, v in balances.items():
            if v < 0:
                bad.append(Violation(step, "ledger", f"negative balance {key}: {fmt(v)}"))
        # fee accounting
        checks = [
            ("taker fees", sink["taker_fee"] + sink["taker_fee_backstop"], fees),
            ("maker rebates", -sink["maker_rebate"], rebates),
            ("conversion fees", sink["conversion_fee"], conv_fees),
            ("oracle slashes", sink["oracle_slash"], slashes),
            ("oracle rewards", -sink["oracle_reward"], rewards),
        ]
        for name, booked, expected in checks:
            if booked != expected:
                bad.append(Violation(step, "fees", f"{name}: FeeSink booked {fmt(booked)}, events imply {fmt(expected)}"))
        # zero-sum positions and backing
        if sum(net_qty.values()) != 0:
            bad.append(Violation(step, "swap-zero-sum", "net open interest is not zero"))
        cs_long = net_qty.get(CURRENCY_SERVICE, 0)
        if supply[USDE] != cs_long:
            bad.append(Violation(step, "backing", f"USDE supply {fmt(supply[USDE])} != service long {fmt(cs_long)}"))

        fr = frames.get(step)
        if fr is None:
            bad.append(Violation(step, "metrics", "no metrics frame for step"))
            continue
        if fr.d != MetricsFrame.spread(fr.a, fr.b):
            bad.append(Violation(step, "metrics", "d does not match (b - a) / a"))
        if fr.exm_supply != supply[EXM] or fr.usde_outstanding != supply[USDE] or fr.cs_long != cs_long:
            bad.append(Violation(step, "metrics", "logged supply or backing disagrees with the replay"))
        if fr.oi_long != fr.oi_short:
            bad.append(Violation(step, "swap-zero-sum", "long and short open interest differ"))

    if not saw_balances:
        return [Violation(-1, "input", "events.jsonl has no balance records (run with recording on)")]
    final = defaultdict(int)
    for acct, assets in summary.get("final_balances", {}).items():
        for asset, b in assets.items():
            final[(acct, asset, "free")] = parse(b["free"])
            final[(acct, asset, "locked")] = parse(b["locked"])
    for key in sorted(set(final) | {k for k, v in balances.items() if v}):
        if final.get(key, 0) != balances.get(key, 0):
            bad.append(Violation(summary.get("steps", -1), "ledger",
                                 f"final balance {key} replays to {fmt(balances.get(key, 0))}"))
    return bad
