"""Background flow and scripted agents used by scenarios."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..fixed import SCALE, ceil_to, floor_to, fp, mul
from ..margin import Side
from .base import Agent, Cancel, Convert, Observation, Submit


def agent_rng(seed: int, agent_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, agent_index, 0xB6]))


@dataclass(frozen=True)
class NoiseParams:
    prob: float = 0.8
    min_qty: int = SCALE // 10
    max_qty: int = SCALE
    width: float = 0.002  # limit sits up to this far through the last price
    leverage: int = SCALE
    inventory_cap: int = 20 * SCALE


class NoiseTrader(Agent):
    """Random aggressive orders around the last virtual trade price."""

    def __init__(self, agent_id: str, rng: np.random.Generator, params: NoiseParams = NoiseParams()):
        self.id = agent_id
        self.rng = rng
        self.params = params
        self.enabled = True

    def decide(self, obs: Observation) -> list:
        p = self.params
        # draw every step so the stream does not depend on the book state
        u_act, u_side, u_qty, u_px = self.rng.random(4)
        if not self.enabled or not obs.mark:
            return []
        out: list = [Cancel()] if obs.orders else []
        if u_act >= p.prob:
            return out
        side = Side.BUY if u_side < 0.5 else Side.SELL
        inv = obs.inventory
        reduce = (side is Side.BUY and inv <= -p.inventory_cap) or (side is Side.SELL and inv >= p.inventory_cap)
        if (side is Side.BUY and inv >= p.inventory_cap) or (side is Side.SELL and inv <= -p.inventory_cap):
            side = side.opposite
            reduce = True
        qty = floor_to(p.min_qty + int((p.max_qty - p.min_qty) * u_qty), obs.lot)
        if reduce:
            qty = min(qty, floor_to(abs(inv), obs.lot))
        if qty <= 0:
            return out
        off = int(p.width * u_px * SCALE)
        if side is Side.BUY:
            price = ceil_to(mul(obs.mark, SCALE + off), obs.tick)
        else:
            price = max(obs.tick, floor_to(mul(obs.mark, SCALE - off), obs.tick))
        out.append(Submit(side, price, qty, leverage=p.leverage, reduce_only=reduce, tag="noise"))
        return out


@dataclass(frozen=True)
class LocalMakerParams:
    spread: float = 0.001
    level_step: float = 0.001
    levels: int = 3
    size: int = SCALE
    leverage: int = SCALE
    inventory_cap: int = 30 * SCALE
    requote_band: float = 0.0005


class LocalMaker(Agent):
    """Liquidity provider that only watches the virtual venue: it quotes around the last trade."""

    def __init__(self, agent_id: str, params: LocalMakerParams = LocalMakerParams()):
        self.id = agent_id
        self.params = params
        self.enabled = True
        self._anchor: Optional[int] = None

    def decide(self, obs: Observation) -> list:
        if not self.enabled or not obs.mark:
            return [Cancel()] if obs.orders else []
        p = self.params
        bids, asks = self.orders_by_side(obs)
        inv = obs.inventory
        band = int(p.requote_band * SCALE)
        moved = self._anchor is None or abs(obs.mark - self._anchor) * SCALE > band * self._anchor
        if not moved and bids and asks:
            return []
        self._anchor = obs.mark
        out: list = [Cancel()]
        for lvl in range(p.levels):
            off = int((p.spread + lvl * p.level_step) * SCALE)
            if inv < p.inventory_cap:
                out.append(Submit(Side.BUY, floor_to(mul(obs.mark, SCALE - off), obs.tick), p.size,
                                  leverage=p.leverage, tag="lm"))
            if inv > -p.inventory_cap:
                out.append(Submit(Side.SELL, ceil_to(mul(obs.mark, SCALE + off), obs.tick), p.size,
                                  leverage=p.leverage, tag="lm"))
        return out


class Scripted(Agent):
    """Replays a fixed list of actions keyed by step.

    Each entry is a dict with ``step`` and ``op`` (submit, cancel, issue, redeem).
    """

    def __init__(self, agent_id: str, script: Sequence[dict]):
        self.id = agent_id
        self.enabled = True
        self.script: Dict[int, List[dict]] = {}
        for entry in script:
            self.script.setdefault(int(entry["step"]), []).append(entry)

    def decide(self, obs: Observation) -> list:
        if not self.enabled:
            return []
        out: list = []
        for e in self.script.get(obs.step, []):
            op = e["op"]
            if op == "submit":
                side = Side.BUY if e["side"] in ("buy", "long") else Side.SELL
                lev = fp(e["leverage"]) if "leverage" in e else None
                out.append(Submit(side, fp(e["price"]), fp(e["qty"]), leverage=lev,
                                  reduce_only=bool(e.get("reduce_only", False)), tag=e.get("tag", "script")))
            elif op == "cancel":
                out.append(Cancel(e.get("tag")))
            elif op in ("issue", "redeem"):
                out.append(Convert(op, fp(e["amount"]),
                                   fp(e["limit_price"]) if e.get("limit_price") is not None else None,
                                   e.get("deadline_step")))
            else:
                raise ValueError(f"unknown scripted op {op!r}")
        return out
