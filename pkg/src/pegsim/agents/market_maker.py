"""Reserve-backed market maker that quotes a ladder around the index."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

from ..errors import StaleIndex
from ..fixed import SCALE, ceil_to, floor_to, mul
from ..ledger import RESERVE
from ..margin import IndexQuote, Side
from .base import Agent, Cancel, Observation, Submit


@dataclass(frozen=True)
class MMParams:
    half_spread: int = SCALE // 200  # relative: 0.005 quotes 99.5 / 100.5 around 100
    levels: int = 1
    level_step: int = SCALE // 400
    size: int = SCALE  # base qty per level
    inventory_cap: int = 50 * SCALE
    leverage: int = SCALE
    requote_band: int = SCALE // 1000
    staleness: int = 1
    account: str = RESERVE

    def __post_init__(self):
        if self.half_spread <= 0:
            raise ValueError("half-spread must be positive")
        if self.levels < 1 or self.size <= 0 or self.inventory_cap <= 0:
            raise ValueError("ladder depth, size and inventory cap must be positive")


@dataclass(frozen=True)
class Quote:
    side: Side
    price: int
    qty: int


def mm_quote(index: IndexQuote, inventory: int, params: MMParams = MMParams(), *,
             tick: int = SCALE // 100, lot: int = SCALE // 10**6, now: Optional[int] = None,
             capacity: Optional[int] = None) -> List[Quote]:
    """Ladder around ``index`` skewed against ``inventory`` (signed base qty).

    With long inventory both quotes move down by up to half the half-spread, and
    the bid disappears once the inventory reaches the cap (the ask mirrors this
    for short inventory). ``capacity`` (EXM) bounds the total quoted notional.
    """
    if now is not None and now - index.step > params.staleness:
        raise StaleIndex(f"index from step {index.step} is stale at step {now}")
    cap = params.inventory_cap
    skew_ratio = max(-SCALE, min(SCALE, inventory * SCALE // cap))
    shift = -mul(mul(skew_ratio, params.half_spread), SCALE // 2)
    quotes: List[Quote] = []
    budget = capacity
    for lvl in range(params.levels):
        off = params.half_spread + lvl * params.level_step
        size = floor_to(params.size, lot)
        for side in (Side.BUY, Side.SELL):
            if side is Side.BUY and inventory >= cap:
                continue
            if side is Side.SELL and inventory <= -cap:
                continue
            if side is Side.BUY:
                price = floor_to(mul(index.price, SCALE - off + shift), tick)
            else:
                price = ceil_to(mul(index.price, SCALE + off + shift), tick)
            if price <= 0:
                continue
            qty = size
            if budget is not None:
                afford = floor_to(budget * params.leverage // price, lot) if price else 0
                qty = min(qty, afford)
                if qty <= 0:
                    continue
                budget -= mul(qty, price) * SCALE // params.leverage + 1
            quotes.append(Quote(side, price, qty))
    return quotes


class MarketMaker(Agent):
    """Quotes rest in the book and are refreshed only when the index drifts past a band."""

    def __init__(self, agent_id: str, params: MMParams = MMParams()):
        self.id = agent_id
        self.params = params
        self.enabled = True
        self._anchor: Optional[int] = None
        self._retired = False

    @property
    def account(self) -> str:
        return self.params.account

    def decide(self, obs: Observation) -> list:
        if not self.enabled:
            if self._retired:
                return []
            self._retired = True
            return [Cancel("mm")]
        if obs.index is None:
            return [Cancel("mm")] if obs.orders else []
        try:
            mm_quote(obs.index, obs.inventory, self.params, tick=obs.tick, lot=obs.lot, now=obs.step)
        except StaleIndex:
            self._anchor = None
            return [Cancel("mm")] if obs.orders else []
        bids, asks = self.orders_by_side(obs)
        moved = (
            self._anchor is None
            or abs(obs.index.price - self._anchor) * SCALE > self.params.requote_band * self._anchor
        )
        cap = self.params.inventory_cap
        want_bid = obs.inventory < cap
        want_ask = obs.inventory > -cap
        if not moved and (bool(bids) or not want_bid) and (bool(asks) or not want_ask):
            return []
        self._anchor = obs.index.price
        # margin capacity: free EXM plus what the current quotes already hold
        quotes = mm_quote(obs.index, obs.inventory, self.params, tick=obs.tick, lot=obs.lot,
                          capacity=obs.free_exm + obs.params.get("held", 0))
        out: list = [Cancel("mm")]
        out += [Submit(q.side, q.price, q.qty, leverage=self.params.leverage, tag="mm") for q in quotes]
        return out
