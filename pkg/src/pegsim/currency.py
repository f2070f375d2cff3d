"""Pegged-token issuance and redemption against fully-backed long positions.

The service holds a single long in the underlying pair on behalf of all
token holders. Issuing buys base at leverage 1, so the margin equals the
notional and the position can lose at most its margin; redeeming sells the
corresponding quantity back at market. Requests join the next batch as
immediate-or-cancel orders: whatever fills is minted (or burned), the rest of
the escrow goes back to the user.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional

from .errors import BelowMinimum, InsufficientFunds, InsufficientTokens, InvariantViolation, NoLiquidity
from .exchange import Exchange, Fill
from .fixed import SCALE, bps, bps_up, ceil_to, floor_to, fmt, mul, mul_div
from .ledger import CURRENCY_SERVICE, EXM, FEE_SINK, RESERVE, USDE, Ledger
from .margin import LONG, Side, required_margin


class Direction(str, Enum):
    ISSUE = "issue"
    REDEEM = "redeem"


@dataclass
class ConversionRequest:
    id: int
    user: str
    direction: Direction
    amount: int
    limit_price: Optional[int] = None
    deadline_step: Optional[int] = None
    submitted_step: int = 0
    status: str = "queued"  # queued | open | done | expired
    order_id: Optional[int] = None
    fee: int = 0
    filled: int = 0
    amount_out: int = 0
    fill_price: Optional[int] = None

    def __post_init__(self):
        if self.amount <= 0:
            raise ValueError("conversion amount must be positive")


@dataclass
class PeggedToken:
    asset: str = USDE
    pair: str = "USD/EXM"
    outstanding: int = 0


class CurrencyService:
    def __init__(self, ledger: Ledger, exchange: Exchange, token: Optional[PeggedToken] = None,
                 fee_bps: int = 10, account: str = CURRENCY_SERVICE):
        self.ledger = ledger
        self.exchange = exchange
        self.token = token or PeggedToken()
        self.fee_bps = fee_bps
        self.account = account
        self.requests: Dict[int, ConversionRequest] = {}
        self._by_order: Dict[int, int] = {}
        self._next = 1
        self.escrow = 0  # EXM held for open or queued issue requests
        self.events: List[dict] = []
        exchange.listeners.append(self.after_batch)

    # -- queries ----------------------------------------------------------

    @property
    def pair(self) -> str:
        return self.token.pair

    def position(self):
        return self.exchange.margin.position(self.account, self.pair)

    def long_qty(self) -> int:
        pos = self.position()
        return pos.qty if pos is not None else 0

    def treasury(self) -> int:
        return self.ledger.free(self.account) - self.escrow

    def check_backing(self) -> None:
        supply = self.ledger.total_supply(self.token.asset)
        if supply != self.long_qty() or supply != self.token.outstanding:
            raise InvariantViolation(
                f"{self.token.asset} supply {fmt(supply)} != backing long {fmt(self.long_qty())}"
            )
        pos = self.position()
        if pos is not None and (pos.side is not LONG or not pos.fully_backed):
            raise InvariantViolation("currency service position is not a fully-backed long")

    # -- requests -----------------------------------------------------------

    def issue(self, user: str, exm_in: int, limit_price: Optional[int] = None,
              deadline_step: Optional[int] = None) -> int:
        """Escrow ``exm_in`` EXM and buy base for it in the next batch.

        Without a limit the order is placed at the best ask immediately.
        """
        fee = bps(exm_in, self.fee_bps)
        if exm_in <= fee:
            raise BelowMinimum("amount does not cover the conversion fee")
        if limit_price is None and self.exchange.best_ask(self.pair) is None:
            raise NoLiquidity("no asks in the book")
        if self.ledger.free(user) < exm_in:
            raise InsufficientFunds(f"{user} holds {fmt(self.ledger.free(user))} EXM")
        req = self._new(user, Direction.ISSUE, exm_in, limit_price, deadline_step)
        self.ledger.transfer(user, self.account, EXM, exm_in, "conversion_escrow")
        self.escrow += exm_in
        if limit_price is None:
            self._submit(req)
        return req.id

    def redeem(self, user: str, usde_in: int, limit_price: Optional[int] = None,
               deadline_step: Optional[int] = None) -> int:
        """Escrow ``usde_in`` tokens and sell that much of the backing long in the next batch."""
        if self.ledger.free(user, self.token.asset) < usde_in:
            raise InsufficientTokens(f"{user} holds {fmt(self.ledger.free(user, self.token.asset))}")
        lot = self.exchange.pairs[self.pair].lot
        if usde_in < lot or usde_in % lot:
            raise BelowMinimum(f"redemption must be a whole number of lots ({fmt(lot)})")
        if limit_price is None and self.exchange.best_bid(self.pair) is None:
            raise NoLiquidity("no bids in the book")
        req = self._new(user, Direction.REDEEM, usde_in, limit_price, deadline_step)
        self.ledger.transfer(user, self.account, self.token.asset, usde_in, "conversion_escrow")
        if limit_price is None:
            self._submit(req)
        return req.id

    def process_delayed(self, step: int) -> List[int]:
        """Submit queued requests whose limit is satisfiable now; refund expired ones."""
        executed = []
        for rid in sorted(self.requests):
            req = self.requests[rid]
            if req.status != "queued":
                continue
            if req.deadline_step is not None and step > req.deadline_step:
                self._refund(req, req.amount)
                req.status = "expired"
                self._event(req, step)
                continue
            if req.direction is Direction.ISSUE:
                ask = self.exchange.best_ask(self.pair)
                ok = ask is not None and (req.limit_price is None or ask <= req.limit_price)
            else:
                bid = self.exchange.best_bid(self.pair)
                ok = bid is not None and (req.limit_price is None or bid >= req.limit_price)
            if ok and self._submit(req):
                executed.append(rid)
        return executed

    # -- batch hooks -------------------------------------------------------------

    def after_batch(self, fills: List[Fill]) -> None:
        by_order = {f.order.id: f for f in fills}
        for rid in sorted(self._by_order.values()):
            req = self.requests[rid]
            fill = by_order.get(req.order_id)
            if req.order_id in self.exchange.orders:
                self.exchange.cancel(req.order_id)  # immediate-or-cancel
            self._by_order.pop(req.order_id, None)
            if req.direction is Direction.ISSUE:
                self._settle_issue(req, fill)
            else:
                self._settle_redeem(req, fill)
            req.status = "done"
            self._event(req, self.exchange.step)

    def rebalance(self) -> int:
        """Restore margin == cost on the backing long after a swap.

        Surplus swap income goes to the treasury; a deficit is covered from the
        treasury first and the Reserve after that. Returns the signed amount
        moved into the position.
        """
        pos = self.position()
        if pos is None or pos.margin == pos.cost:
            return 0
        diff = pos.cost - pos.margin
        engine = self.exchange.margin
        if diff < 0:
            engine.withdraw_excess(pos, -diff, self.account)
            return diff
        from_treasury = min(diff, max(0, self.treasury()))
        if from_treasury:
            engine.top_up(pos, from_treasury, self.account)
        if diff - from_treasury:
            engine.top_up(pos, diff - from_treasury, RESERVE)
        return diff

    # -- internals -----------------------------------------------------------------

    def _new(self, user, direction, amount, limit_price, deadline_step) -> ConversionRequest:
        req = ConversionRequest(self._next, user, direction, amount, limit_price, deadline_step,
                                submitted_step=self.exchange.step)
        self.requests[req.id] = req
        self._next += 1
        return req

    def _submit(self, req: ConversionRequest) -> bool:
        cfg = self.exchange.pairs[self.pair]
        if req.direction is Direction.ISSUE:
            price = self.exchange.best_ask(self.pair)
            if price is None:
                raise NoLiquidity("no asks in the book")
            if req.limit_price is not None:
                price = min(price, floor_to(req.limit_price, cfg.tick))
            req.fee = bps(req.amount, self.fee_bps)
            budget = req.amount - req.fee
            per_unit = price + bps_up(price, cfg.taker_fee_bps)
            qty = floor_to(budget * SCALE // per_unit, cfg.lot)
            while qty > 0 and self._hold(qty, price) > budget:
                qty -= cfg.lot
            if qty <= 0:
                raise BelowMinimum("amount buys less than one lot")
            req.order_id = self.exchange.submit(self.account, Side.BUY, price, qty, self.pair,
                                                leverage=SCALE, tag=f"issue:{req.id}")
        else:
            price = self.exchange.best_bid(self.pair)
            if price is None:
                raise NoLiquidity("no bids in the book")
            if req.limit_price is not None:
                price = max(price, ceil_to(req.limit_price, cfg.tick))
            req.order_id = self.exchange.submit(self.account, Side.SELL, price, req.amount, self.pair,
                                                reduce_only=True, tag=f"redeem:{req.id}")
        self._by_order[req.order_id] = req.id
        req.status = "open"
        return True

    def _hold(self, qty: int, price: int) -> int:
        cfg = self.exchange.pairs[self.pair]
        notional = mul(qty, price)
        return required_margin(qty, price, SCALE) + bps_up(notional, cfg.taker_fee_bps)

    def _order_fees(self, order_id: int) -> int:
        fee = 0
        for t in self.exchange.last_trades:
            if t.buy_order == order_id:
                fee += t.buy_fee
            elif t.sell_order == order_id:
                fee += t.sell_fee
        return fee

    def _settle_issue(self, req: ConversionRequest, fill: Optional[Fill]) -> None:
        budget = req.amount - req.fee
        spent = 0
        if fill is not None and fill.qty:
            q, p = fill.qty, fill.price
            spent = required_margin(q, p, SCALE) + self._order_fees(req.order_id)
            req.filled, req.fill_price = q, p
            self.ledger.mint(self.token.asset, req.user, q, self.account, "issue")
            self.token.outstanding += q
            req.amount_out = q
        # the service fee is charged only on the part of the budget actually used
        unused = budget - spent
        fee_kept = req.fee - mul_div(req.fee, unused, budget) if budget else 0
        if fee_kept:
            self.ledger.transfer(self.account, FEE_SINK, EXM, fee_kept, "conversion_fee")
        req.fee = fee_kept
        refund = req.amount - spent - fee_kept
        self.escrow -= req.amount
        if refund > 0:
            self.ledger.transfer(self.account, req.user, EXM, refund, "conversion_refund")
        elif refund < 0:
            raise InvariantViolation(f"issue request {req.id} overspent its escrow")

    def _settle_redeem(self, req: ConversionRequest, fill: Optional[Fill]) -> None:
        q = fill.qty if fill is not None else 0
        if q:
            proceeds = fill.result.payout - self._order_fees(req.order_id)
            fee = bps(max(proceeds, 0), self.fee_bps)
            if fee:
                self.ledger.transfer(self.account, FEE_SINK, EXM, fee, "conversion_fee")
            out = proceeds - fee
            if out > 0:
                self.ledger.transfer(self.account, req.user, EXM, out, "redeem")
            self.ledger.burn(self.token.asset, self.account, q, self.account, "redeem")
            self.token.outstanding -= q
            req.filled, req.fill_price, req.fee, req.amount_out = q, fill.price, fee, max(out, 0)
        if req.amount - q:
            self.ledger.transfer(self.account, req.user, self.token.asset, req.amount - q,
                                 "conversion_refund")

    def _refund(self, req: ConversionRequest, amount: int) -> None:
        if req.direction is Direction.ISSUE:
            self.escrow -= amount
            self.ledger.transfer(self.account, req.user, EXM, amount, "conversion_refund")
        else:
            self.ledger.transfer(self.account, req.user, self.token.asset, amount, "conversion_refund")

    def _event(self, req: ConversionRequest, step: int) -> None:
        self.events.append({
            "type": "conversion", "step": step, "user": req.user, "direction": req.direction.value,
            "status": req.status, "amount_in": fmt(req.amount), "amount_out": fmt(req.amount_out),
            "fill_price": fmt(req.fill_price) if req.fill_price is not None else None,
            "fee": fmt(req.fee),
        })
