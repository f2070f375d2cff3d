"""Observations handed to agents and the actions they may return.

Agents never touch the ledger or the book directly. The harness builds an
``Observation`` per agent, calls ``decide`` and applies the returned actions
in agent-id order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from ..margin import IndexQuote, Position, Side


@dataclass(frozen=True)
class OrderView:
    id: int
    side: Side
    price: int
    remaining: int
    reduce_only: bool
    tag: str


@dataclass
class Observation:
    step: int
    index: Optional[IndexQuote]
    real_price: int
    mark: int  # last virtual clearing price
    best_bid: Optional[int]
    best_ask: Optional[int]
    rate: int  # current swap rate
    cb_rate: int  # central bank long-term rate
    swap_period: int
    tick: int
    lot: int
    taker_fee_bps: int
    free_exm: int
    position: Optional[Position]
    orders: List[OrderView] = field(default_factory=list)
    real_balances: Dict[str, int] = field(default_factory=dict)
    in_transit: Dict[str, int] = field(default_factory=dict)
    params: Dict[str, object] = field(default_factory=dict)

    @property
    def inventory(self) -> int:
        if self.position is None:
            return 0
        return self.position.qty * int(self.position.side)


@dataclass(frozen=True)
class Submit:
    side: Side
    price: int
    qty: int
    leverage: Optional[int] = None
    reduce_only: bool = False
    tag: str = ""


@dataclass(frozen=True)
class Cancel:
    tag: Optional[str] = None  # None cancels every order of the agent


@dataclass(frozen=True)
class RealTrade:
    """Trade at the real-world venue: sell (or buy) ``qty`` units of ``asset`` for the other one."""

    side: str  # "sell" | "buy"
    asset: str  # "USD" (the base); the counter asset is EXM
    qty: int


@dataclass(frozen=True)
class Transfer:
    """Move ``amount`` of ``asset`` between the agent's real-venue and exchange accounts."""

    asset: str
    amount: int
    to_exchange: bool


@dataclass(frozen=True)
class Convert:
    direction: str  # "issue" | "redeem"
    amount: int
    limit_price: Optional[int] = None
    deadline_step: Optional[int] = None


Action = object  # Submit | Cancel | RealTrade | Transfer | Convert


class Agent:
    id: str = ""
    enabled: bool = True

    def decide(self, obs: Observation) -> List[Action]:
        raise NotImplementedError

    def disable(self) -> None:
        self.enabled = False

    def orders_by_side(self, obs: Observation) -> Tuple[List[OrderView], List[OrderView]]:
        bids = [o for o in obs.orders if o.side is Side.BUY]
        asks = [o for o in obs.orders if o.side is Side.SELL]
        return bids, asks
