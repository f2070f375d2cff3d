"""Arbitrage miner running the case 1 / case 2 strategies between venues."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

from ..fixed import SCALE, ceil_to, floor_to, mul, to_float
from ..margin import LONG, SHORT, Side
from .base import Agent, Cancel, Observation, RealTrade, Submit, Transfer
from .stability import SpreadModel, case2_fraction, participant_fraction


@dataclass(frozen=True)
class ArbParams:
    R_D: float = 0.001  # per swap period
    R_E: float = 0.0
    min_edge: float = 0.001
    confidence: float = 0.6
    lam: float = 0.0  # mean reversion of the modeled spread per horizon
    sigma: float = 0.02
    horizon: float = 1.0
    entry_buffer: float = 0.002  # entry limits stay this far inside the real price
    exit_slippage: float = 0.005
    clip: int = 5 * SCALE  # base qty per entry order
    max_position: int = 50 * SCALE
    min_hold: int = 16
    rebalance_skew: float = 0.8
    use_case2: bool = True

    def __post_init__(self):
        if self.R_D < 0 or self.R_E < 0:
            raise ValueError("risk-free returns must be non-negative")


@dataclass(frozen=True)
class Assessment:
    case: int
    d0: float
    probability: float
    edge: float

    @property
    def go(self) -> bool:
        return self.case != 0


def assess(params: ArbParams, a: float, price: float, r: float, side: Side) -> Assessment:
    """Evaluate entering at ``price`` on ``side`` given real price ``a`` and swap rate ``r``."""
    d0 = (price - a) / a
    model = SpreadModel.mean_reverting(d0, params.lam, params.sigma, params.horizon)
    if side is LONG:
        if d0 >= 0:
            return Assessment(0, d0, 0.0, 0.0)
        v = participant_fraction(model, r, d0, params.R_D)
        edge = r + model.mean() - d0 - params.R_D * (1 + d0)
        ok = v >= params.confidence and edge >= params.min_edge
        return Assessment(1 if ok else 0, d0, v, edge)
    if d0 <= 0:
        return Assessment(0, d0, 0.0, 0.0)
    v = case2_fraction(model, r, d0, params.R_E)
    edge = -r + d0 / (1 + params.R_E) - params.R_E / (1 + params.R_E) - model.mean()
    ok = v >= params.confidence and edge >= params.min_edge
    return Assessment(2 if ok else 0, d0, v, edge)


class Miner(Agent):
    def __init__(self, agent_id: str, params: ArbParams = ArbParams()):
        self.id = agent_id
        self.params = params
        self.enabled = True
        self.opened_at: Optional[int] = None

    def decide(self, obs: Observation) -> list:
        if not self.enabled or obs.index is None:
            return []
        p = self.params
        out: list = []
        if obs.orders:
            out.append(Cancel())
        a = obs.index.price
        af = to_float(a)
        r = to_float(obs.rate)
        inv = obs.inventory
        pos = obs.position
        if pos is None:
            self.opened_at = None
        elif self.opened_at is None:
            self.opened_at = obs.step

        # unwind once the trade no longer pays and the position has been held long enough
        if pos is not None and obs.step - (self.opened_at or obs.step) >= p.min_hold:
            mark = to_float(obs.mark) if obs.mark else af
            still = assess(p, af, mark, r, pos.side)
            if not still.go:
                qty = floor_to(pos.qty, obs.lot)
                if pos.side is LONG:
                    limit = max(obs.tick, floor_to(mul(a, SCALE - int(p.exit_slippage * SCALE)), obs.tick))
                    out.append(Submit(Side.SELL, limit, qty, reduce_only=True, tag="exit"))
                else:
                    limit = ceil_to(mul(a, SCALE + int(p.exit_slippage * SCALE)), obs.tick)
                    out.append(Submit(Side.BUY, limit, qty, reduce_only=True, tag="exit"))
                return out + self._rebalance(obs)

        # case 1: buy the virtual asset while it trades below the real price
        if obs.best_ask is not None and inv < p.max_position and inv >= 0:
            limit = floor_to(mul(a, SCALE - int(p.entry_buffer * SCALE)), obs.tick)
            if obs.best_ask <= limit:
                view = assess(p, af, to_float(limit), r, LONG)
                if view.case == 1:
                    qty = self._size(obs, limit, p.max_position - inv)
                    if qty:
                        out.append(Submit(Side.BUY, limit, qty, leverage=SCALE, tag="case1"))
        # case 2: sell it while it trades above
        elif p.use_case2 and obs.best_bid is not None and -inv < p.max_position and inv <= 0:
            limit = ceil_to(mul(a, SCALE + int(p.entry_buffer * SCALE)), obs.tick)
            if obs.best_bid >= limit:
                view = assess(p, af, to_float(limit), r, SHORT)
                if view.case == 2:
                    qty = self._size(obs, limit, p.max_position + inv)
                    if qty:
                        out.append(Submit(Side.SELL, limit, qty, leverage=SCALE, tag="case2"))
        return out + self._rebalance(obs)

    def _size(self, obs: Observation, price: int, room: int) -> int:
        # fully-backed sizing: margin = notional, plus the taker fee
        per_unit = price + price * obs.taker_fee_bps // 10_000 + 1
        afford = obs.free_exm * SCALE // per_unit
        return floor_to(min(self.params.clip, room, afford), obs.lot)

    def _rebalance(self, obs: Observation) -> list:
        """Keep EXM capital split between venues within the configured skew."""
        real_exm = obs.real_balances.get("EXM", 0)
        real_usd_value = mul(obs.real_balances.get("USD", 0), obs.real_price)
        venue = obs.free_exm + obs.in_transit.get("EXM", 0)
        total = venue + real_exm + real_usd_value
        if total <= 0:
            return []
        hi = int(self.params.rebalance_skew * SCALE)
        share = venue * SCALE // total
        out: list = []
        if share < SCALE - hi:
            need = total // 2 - venue
            if real_exm < need and obs.real_balances.get("USD", 0) > 0:
                usd = min(obs.real_balances["USD"], ceil_to((need - real_exm) * SCALE // obs.real_price, obs.lot))
                usd = floor_to(usd, obs.lot)
                if usd > 0:
                    out.append(RealTrade("sell", "USD", usd))
                    real_exm += mul(usd, obs.real_price)
            amt = min(need, real_exm)
            if amt > 0:
                out.append(Transfer("EXM", amt, to_exchange=True))
        elif share > hi:
            amt = venue - total // 2
            amt = min(amt, obs.free_exm)
            if amt > 0:
                out.append(Transfer("EXM", amt, to_exchange=False))
        return out
