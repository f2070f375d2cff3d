"""Isolated-margin position tracking and the margin-call processor.

Positions are kept per (owner, pair) and netted: a fill on the opposite side
reduces the position before opening the other way. Position margin lives in
the ``Clearing`` system account; ``Position.margin`` is the owner's claim on
it. Cost basis is tracked as an exact integer so that the clearing identity

    clearing_balance == sum(margin) - sum(cost of longs) + sum(cost of shorts)

holds with no rounding slack.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import TYPE_CHECKING, Dict, List, Optional, Tuple

from .errors import InsufficientFunds, InvariantViolation, LeverageExceeded, StaleIndex
from .fixed import SCALE, ceil_to, div, floor_to, fmt, mul, mul_div
from .ledger import CLEARING, EXM, RESERVE, Ledger

if TYPE_CHECKING:
    from .exchange import Exchange


class Side(IntEnum):
    BUY = 1
    SELL = -1

    @property
    def opposite(self) -> "Side":
        return Side(-self)

    @property
    def label(self) -> str:
        return "long" if self is Side.BUY else "short"


LONG = Side.BUY
SHORT = Side.SELL


@dataclass
class Position:
    owner: str
    pair: str
    side: Side
    qty: int
    cost: int
    margin: int
    realized: int = 0
    funding: int = 0
    liquidating: bool = False

    @property
    def entry_price(self) -> int:
        return div(self.cost, self.qty) if self.qty else 0

    @property
    def fully_backed(self) -> bool:
        return self.side is LONG and self.margin >= self.cost

    @property
    def bankruptcy_price(self) -> int:
        """Mark at which equity reaches zero (floored at 0 for longs)."""
        if self.side is LONG:
            return max(0, div(self.cost - self.margin, self.qty))
        return div(self.cost + self.margin, self.qty)


@dataclass(frozen=True)
class MarginParams:
    max_leverage: int = 1 * SCALE
    maintenance_ratio: int = 0
    liquidation_slippage: int = SCALE // 20
    staleness: int = 1

    def __post_init__(self):
        if self.max_leverage < SCALE:
            raise ValueError("max_leverage must be >= 1")
        if not 0 <= self.maintenance_ratio < SCALE:
            raise ValueError("maintenance_ratio must be in [0, 1)")


@dataclass(frozen=True)
class IndexQuote:
    pair: str
    price: int
    step: int
    source_volume: int = 0

    def __post_init__(self):
        if self.price <= 0:
            raise ValueError("index price must be positive")


@dataclass
class FillResult:
    position: Optional[Position]
    closed_qty: int = 0
    opened_qty: int = 0
    realized: int = 0
    payout: int = 0
    shortfall: int = 0


@dataclass(frozen=True)
class Liquidation:
    step: int
    owner: str
    pair: str
    side: Side
    qty: int
    bankruptcy_price: int
    index_price: int
    order_id: Optional[int] = None

    def event(self) -> dict:
        return {
            "type": "liquidation_triggered", "step": self.step, "owner": self.owner,
            "pair": self.pair, "side": self.side.label, "qty": fmt(self.qty),
            "bankruptcy_price": fmt(self.bankruptcy_price), "index_price": fmt(self.index_price),
        }


def equity(position: Position, mark_price: int) -> int:
    """Margin plus unrealized PnL at ``mark_price``."""
    if mark_price < 0:
        raise ValueError("mark price must be non-negative")
    value = mul(position.qty, mark_price)
    if position.side is LONG:
        return position.margin + value - position.cost
    return position.margin + position.cost - value


def required_margin(qty: int, price: int, leverage: int) -> int:
    """Smallest margin with qty*price <= margin*leverage, rounded up to 1 ulp."""
    notional = mul(qty, price)
    return -((-notional * SCALE) // leverage)


class MarginEngine:
    def __init__(self, ledger: Ledger, params: Optional[Dict[str, MarginParams]] = None):
        self.ledger = ledger
        self.params: Dict[str, MarginParams] = dict(params or {})
        self.positions: Dict[Tuple[str, str], Position] = {}
        self.exchange: Optional["Exchange"] = None
        self.step = 0
        # pair -> cumulative realized PnL (cost-basis accounting, excludes funding)
        self.realized_total: Dict[str, int] = {}
        self.shortfall_total: Dict[str, int] = {}
        self.events: List[dict] = []

    def params_for(self, pair: str) -> MarginParams:
        return self.params.setdefault(pair, MarginParams())

    def position(self, owner: str, pair: str) -> Optional[Position]:
        return self.positions.get((owner, pair))

    def open_positions(self, pair: Optional[str] = None) -> List[Position]:
        return [p for (o, pr), p in sorted(self.positions.items()) if pair is None or pr == pair]

    def open_interest(self, pair: str) -> Tuple[int, int]:
        longs = shorts = 0
        for p in self.positions.values():
            if p.pair != pair:
                continue
            if p.side is LONG:
                longs += p.qty
            else:
                shorts += p.qty
        return longs, shorts

    def split(self, owner: str, pair: str, side: Side, qty: int) -> Tuple[int, int]:
        """(qty that closes the existing opposite position, qty that opens/increases)."""
        pos = self.positions.get((owner, pair))
        if pos is None or pos.side is side:
            return 0, qty
        closed = min(qty, pos.qty)
        return closed, qty - closed

    def open_or_update(
        self,
        owner: str,
        pair: str,
        side: Side,
        qty: int,
        price: int,
        margin: int = 0,
        *,
        from_locked: bool = False,
        check_leverage: bool = True,
    ) -> FillResult:
        """Apply a fill of ``qty`` at ``price`` to ``owner``'s position.

        ``margin`` funds only the increasing part of the fill and is taken from
        the owner's free (or locked, for exchange order holds) EXM balance.
        """
        if qty <= 0 or price <= 0:
            raise ValueError("fill qty and price must be positive")
        params = self.params_for(pair)
        closed, opened = self.split(owner, pair, side, qty)
        if opened:
            over = mul(opened, price) * SCALE > margin * params.max_leverage
            if margin <= 0 or (check_leverage and over):
                raise LeverageExceeded(
                    f"{fmt(mul(opened, price))} notional on {fmt(margin)} margin exceeds "
                    f"{fmt(params.max_leverage)}x"
                )
            have = self.ledger.locked(owner) if from_locked else self.ledger.free(owner)
            if have < margin:
                raise InsufficientFunds(f"{owner} cannot post {fmt(margin)} margin")
        elif margin:
            raise ValueError("margin supplied for a fill that only reduces a position")

        result = FillResult(position=None)
        if closed:
            self._close(owner, pair, closed, price, result)
        if opened:
            if from_locked:
                self.ledger.transfer_locked(owner, CLEARING, EXM, margin, "margin")
            else:
                self.ledger.transfer(owner, CLEARING, EXM, margin, "margin")
            notional = mul(opened, price)
            pos = self.positions.get((owner, pair))
            if pos is None:
                pos = Position(owner, pair, side, 0, 0, 0)
                self.positions[(owner, pair)] = pos
            pos.qty += opened
            pos.cost += notional
            pos.margin += margin
            result.opened_qty = opened
        result.position = self.positions.get((owner, pair))
        return result

    def _close(self, owner: str, pair: str, qty: int, price: int, result: FillResult) -> None:
        pos = self.positions[(owner, pair)]
        notional = mul(qty, price)
        if qty == pos.qty:
            cost_out, margin_out = pos.cost, pos.margin
        else:
            cost_out = mul_div(pos.cost, qty, pos.qty)
            margin_out = mul_div(pos.margin, qty, pos.qty)
        pnl = notional - cost_out if pos.side is LONG else cost_out - notional
        payout = margin_out + pnl
        pos.qty -= qty
        pos.cost -= cost_out
        pos.margin -= margin_out
        pos.realized += pnl
        self.realized_total[pair] = self.realized_total.get(pair, 0) + pnl
        shortfall = 0
        if payout > 0:
            self.ledger.transfer(CLEARING, owner, EXM, payout, "settle")
        elif payout < 0:
            shortfall = -payout
            self.ledger.transfer(RESERVE, CLEARING, EXM, shortfall, "liquidation_shortfall")
            self.shortfall_total[pair] = self.shortfall_total.get(pair, 0) + shortfall
        if pos.qty == 0:
            if pos.margin:
                # only reachable through funding adjustments; return the dust
                self.ledger.transfer(CLEARING, owner, EXM, pos.margin, "settle")
                pos.margin = 0
            del self.positions[(owner, pair)]
        result.closed_qty += qty
        result.realized += pnl
        result.payout += max(payout, 0)
        result.shortfall += shortfall

    def adjust_margin(self, pos: Position, delta: int) -> None:
        """Bookkeeping-only margin change (cash already moved within Clearing)."""
        pos.margin += delta
        pos.funding += delta
        if pos.margin < 0:
            raise InvariantViolation(f"negative margin for {pos.owner}/{pos.pair}")

    def top_up(self, pos: Position, amount: int, source: Optional[str] = None) -> None:
        src = source or pos.owner
        self.ledger.transfer(src, CLEARING, EXM, amount, "margin")
        pos.margin += amount

    def withdraw_excess(self, pos: Position, amount: int, dest: Optional[str] = None) -> None:
        if amount > pos.margin:
            raise InsufficientFunds("withdrawal exceeds position margin")
        self.ledger.transfer(CLEARING, dest or pos.owner, EXM, amount, "margin_release")
        pos.margin -= amount

    # -- margin-call processor ---------------------------------------------

    def check_index(self, index: IndexQuote, step: int) -> None:
        staleness = self.params_for(index.pair).staleness
        if step - index.step > staleness:
            raise StaleIndex(f"index from step {index.step} is older than {staleness} at step {step}")

    def under_margined(self, index: IndexQuote) -> List[Position]:
        ratio = self.params_for(index.pair).maintenance_ratio
        out = []
        for pos in self.open_positions(index.pair):
            if equity(pos, index.price) <= mul(ratio, pos.margin):
                out.append(pos)
        return out

    def run_margin_calls(self, index: IndexQuote, step: Optional[int] = None) -> List[Liquidation]:
        """Force-close every position whose equity at the index is at or below maintenance.

        Liquidation orders are reduce-only limits priced at the bankruptcy price
        widened by the slippage band toward (and beyond) the index; they join the
        next batch. Positions already in liquidation are re-priced, not duplicated.
        """
        step = self.step if step is None else step
        self.check_index(index, step)
        params = self.params_for(index.pair)
        out: List[Liquidation] = []
        for pos in self.under_margined(index):
            ref = pos.bankruptcy_price
            if pos.side is LONG:
                ref = min(ref, index.price) if ref else index.price
                limit = mul(ref, SCALE - params.liquidation_slippage)
            else:
                ref = max(ref, index.price)
                limit = mul(ref, SCALE + params.liquidation_slippage)
            liq = Liquidation(step, pos.owner, pos.pair, pos.side, pos.qty, pos.bankruptcy_price, index.price)
            if self.exchange is not None:
                oid = self.exchange.liquidate(pos, limit)
                liq = Liquidation(step, pos.owner, pos.pair, pos.side, pos.qty,
                                  pos.bankruptcy_price, index.price, oid)
            if not pos.liquidating:
                self.events.append(liq.event())
                out.append(liq)
            pos.liquidating = True
        return out

    # -- invariants -----------------------------------------------------------

    def clearing_identity(self) -> Tuple[int, int]:
        """(Clearing account balance, value implied by open positions)."""
        implied = 0
        for p in self.positions.values():
            implied += p.margin + (p.cost if p.side is SHORT else -p.cost)
        return self.ledger.balance(CLEARING, EXM).total, implied

    def check_invariants(self) -> None:
        actual, implied = self.clearing_identity()
        if actual != implied:
            raise InvariantViolation(f"clearing balance {fmt(actual)} != implied {fmt(implied)}")
        pairs = {p.pair for p in self.positions.values()}
        for pair in pairs:
            longs, shorts = self.open_interest(pair)
            if longs != shorts:
                raise InvariantViolation(f"{pair}: long OI {fmt(longs)} != short OI {fmt(shorts)}")
        for p in self.positions.values():
            if p.qty <= 0 or p.margin < 0:
                raise InvariantViolation(f"bad position {p}")

    def zero_sum(self, pair: str, mark: int) -> int:
        """Realized + unrealized PnL across the pair at ``mark``, in units of 1e-36.

        Exactly zero whenever long and short open interest match.
        """
        total = self.realized_total.get(pair, 0) * SCALE
        for p in self.positions.values():
            if p.pair != pair:
                continue
            value = p.qty * mark
            total += (value - p.cost * SCALE) if p.side is LONG else (p.cost * SCALE - value)
        return total
