"""Limit order book with batch uniform-price execution.

Orders collect in the book during a step; :meth:`Exchange.run_batch` clears
all crossing interest at a single price. The clearing price maximizes
executable volume (ties go to the midpoint of the tied range, rounded down to
the tick). The lighter side fills completely; on the heavier side better
prices fill first and the orders at the marginal price share what is left in
proportion to their size, in whole lots. Filling the whole heavier side
pro-rata would leave better-priced remainders crossing the book.

Orders resting from an earlier batch are makers and earn the rebate; orders
submitted in the current batch are takers and pay the taker fee.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import BadLot, BadTick, InsufficientMargin, InvariantViolation, LeverageExceeded, NotOwner, UnknownOrder
from .fixed import SCALE, bps, bps_up, ceil_to, floor_to, fmt, mul
from .ledger import EXM, FEE_SINK, RESERVE, Ledger
from .margin import FillResult, MarginEngine, Position, Side, required_margin


@dataclass(frozen=True)
class PairConfig:
    pair: str = "USD/EXM"
    base: str = "USD"
    quote: str = "EXM"
    tick: int = SCALE // 100
    lot: int = SCALE // 10**6
    taker_fee_bps: int = 10
    maker_rebate_bps: int = 8

    def __post_init__(self):
        if self.base == self.quote:
            raise ValueError("base and quote must differ")
        if self.maker_rebate_bps > self.taker_fee_bps or self.maker_rebate_bps < 0:
            raise ValueError("rebate must be non-negative and not exceed the taker fee")


@dataclass
class Order:
    id: int
    owner: str
    pair: str
    side: Side
    price: int
    qty: int
    remaining: int
    submitted_step: int
    leverage: int
    hold: int = 0
    reduce_only: bool = False
    liquidation: bool = False
    resting: bool = False
    tag: str = ""


@dataclass(frozen=True)
class Trade:
    step: int
    pair: str
    price: int
    qty: int
    buy_order: int
    sell_order: int
    buyer: str
    seller: str
    buyer_is_taker: bool
    seller_is_taker: bool
    buy_fee: int
    sell_fee: int

    @property
    def notional(self) -> int:
        return mul(self.qty, self.price)

    @property
    def taker_fee(self) -> int:
        return sum(f for f in (self.buy_fee, self.sell_fee) if f > 0)

    @property
    def maker_rebate(self) -> int:
        return -sum(f for f in (self.buy_fee, self.sell_fee) if f < 0)

    @property
    def taker(self) -> str:
        return self.buyer if self.buyer_is_taker else self.seller

    @property
    def maker(self) -> Optional[str]:
        if not self.buyer_is_taker:
            return self.buyer
        if not self.seller_is_taker:
            return self.seller
        return None

    def event(self) -> dict:
        return {
            "type": "trade", "step": self.step, "pair": self.pair, "price": fmt(self.price),
            "qty": fmt(self.qty), "buyer": self.buyer, "seller": self.seller,
            "buy_order": self.buy_order, "sell_order": self.sell_order,
            "taker": self.taker, "maker": self.maker,
            "buy_fee": fmt(self.buy_fee), "sell_fee": fmt(self.sell_fee),
        }


@dataclass
class Fill:
    """Per-order execution summary handed to listeners after a batch."""

    order: Order
    qty: int
    price: int
    result: FillResult


def clearing_price(orders: Sequence[Order], tick: int) -> Tuple[int, int]:
    """(price, volume) of the max-volume uniform-price auction; (0, 0) if nothing crosses."""
    buys = [o for o in orders if o.side is Side.BUY and o.remaining > 0]
    sells = [o for o in orders if o.side is Side.SELL and o.remaining > 0]
    if not buys or not sells:
        return 0, 0
    candidates = sorted({o.price for o in buys} | {o.price for o in sells})
    best_v = 0
    tied: List[int] = []
    for p in candidates:
        d = sum(o.remaining for o in buys if o.price >= p)
        s = sum(o.remaining for o in sells if o.price <= p)
        v = min(d, s)
        if v > best_v:
            best_v, tied = v, [p]
        elif v == best_v and v > 0:
            tied.append(p)
    if best_v == 0:
        return 0, 0
    lo, hi = tied[0], tied[-1]
    return floor_to((lo + hi) // 2, tick), best_v


def allocate(side_orders: Sequence[Order], volume: int, lot: int) -> Dict[int, int]:
    """Split ``volume`` over orders of one side: price priority, pro-rata at the marginal level.

    Returns order id -> filled qty. Within the marginal level each order gets
    floor(R*q_i/Q) lots, and the leftover lots go to the largest fractional
    remainders, ties to the lower order id.
    """
    fills: Dict[int, int] = {}
    if volume <= 0:
        return fills
    if side_orders and side_orders[0].side is Side.BUY:
        key = lambda o: -o.price  # noqa: E731
    else:
        key = lambda o: o.price  # noqa: E731
    left = volume
    for _, level_iter in itertools.groupby(sorted(side_orders, key=lambda o: (key(o), o.id)), key=key):
        level = list(level_iter)
        level_qty = sum(o.remaining for o in level)
        if level_qty <= left:
            for o in level:
                fills[o.id] = o.remaining
            left -= level_qty
            if left == 0:
                break
            continue
        fills.update(pro_rata([(o.id, o.remaining) for o in level], left, lot))
        break
    return fills


def pro_rata(orders: Sequence[Tuple[int, int]], volume: int, lot: int) -> Dict[int, int]:
    """Floor pro-rata of ``volume`` over (id, qty) pairs with largest-remainder lot top-up."""
    total_lots = sum(q for _, q in orders) // lot
    vol_lots = volume // lot
    if volume % lot or any(q % lot for _, q in orders):
        raise BadLot("pro-rata inputs must sit on the lot grid")
    if vol_lots > total_lots:
        raise ValueError("volume exceeds available quantity")
    base: Dict[int, int] = {}
    rema: List[Tuple[int, int]] = []
    for oid, q in orders:
        num = vol_lots * (q // lot)
        base[oid], r = divmod(num, total_lots)
        rema.append((r, oid))
    leftover = vol_lots - sum(base.values())
    for r, oid in sorted(rema, key=lambda t: (-t[0], t[1]))[:leftover]:
        base[oid] += 1
    return {oid: n * lot for oid, n in base.items() if n}


class Exchange:
    def __init__(self, ledger: Ledger, margin: MarginEngine, pairs: Iterable[PairConfig] = (PairConfig(),)):
        self.ledger = ledger
        self.margin = margin
        margin.exchange = self
        self.pairs: Dict[str, PairConfig] = {p.pair: p for p in pairs}
        self.orders: Dict[int, Order] = {}
        self._ids = itertools.count(1)
        self.step = 0
        self.events: List[dict] = []
        self.trade_log: List[Trade] = []
        self.last_trades: List[Trade] = []
        self.listeners: List[Callable[[List[Fill]], None]] = []
        self._liq_orders: Dict[Tuple[str, str], int] = {}

    # -- queries -----------------------------------------------------------

    def book(self, pair: str, side: Side) -> List[Order]:
        orders = [o for o in self.orders.values() if o.pair == pair and o.side is side]
        if side is Side.BUY:
            return sorted(orders, key=lambda o: (-o.price, o.id))
        return sorted(orders, key=lambda o: (o.price, o.id))

    def best_bid(self, pair: str = "USD/EXM") -> Optional[int]:
        prices = [o.price for o in self.orders.values() if o.pair == pair and o.side is Side.BUY]
        return max(prices) if prices else None

    def best_ask(self, pair: str = "USD/EXM") -> Optional[int]:
        prices = [o.price for o in self.orders.values() if o.pair == pair and o.side is Side.SELL]
        return min(prices) if prices else None

    def depth(self, pair: str, side: Side, limit: int) -> int:
        """Quantity available to a taker on ``side`` at prices no worse than ``limit``."""
        book_side = side.opposite
        return sum(
            o.remaining for o in self.orders.values()
            if o.pair == pair and o.side is book_side
            and (o.price <= limit if side is Side.BUY else o.price >= limit)
        )

    def orders_of(self, owner: str, pair: Optional[str] = None) -> List[Order]:
        return sorted(
            (o for o in self.orders.values() if o.owner == owner and (pair is None or o.pair == pair)),
            key=lambda o: o.id,
        )

    # -- commands ------------------------------------------------------------

    def submit(
        self,
        owner: str,
        side: Side,
        price: int,
        qty: int,
        pair: str = "USD/EXM",
        *,
        leverage: Optional[int] = None,
        reduce_only: bool = False,
        tag: str = "",
        _liquidation: bool = False,
    ) -> int:
        cfg = self.pairs[pair]
        if price <= 0 or price % cfg.tick:
            raise BadTick(f"price {fmt(price)} is not on tick {fmt(cfg.tick)}")
        if qty <= 0 or qty % cfg.lot:
            raise BadLot(f"qty {fmt(qty)} is not on lot {fmt(cfg.lot)}")
        max_lev = self.margin.params_for(pair).max_leverage
        lev = max_lev if leverage is None else leverage
        if lev < SCALE or lev > max_lev:
            raise LeverageExceeded(f"leverage {fmt(lev)} outside [1, {fmt(max_lev)}]")
        hold = 0
        if reduce_only:
            closable = self._closable(owner, pair, side)
            if qty > closable:
                raise InsufficientMargin(f"reduce-only qty {fmt(qty)} exceeds closable {fmt(closable)}")
        else:
            hold = required_margin(qty, price, lev) + bps_up(mul(qty, price), cfg.taker_fee_bps)
            if self.ledger.free(owner) < hold:
                raise InsufficientMargin(
                    f"{owner} needs {fmt(hold)} EXM margin capacity, has {fmt(self.ledger.free(owner))}"
                )
            self.ledger.lock(owner, EXM, hold, "order_hold")
        oid = next(self._ids)
        self.orders[oid] = Order(
            id=oid, owner=owner, pair=pair, side=side, price=price, qty=qty, remaining=qty,
            submitted_step=self.step, leverage=lev, hold=hold, reduce_only=reduce_only,
            liquidation=_liquidation, tag=tag,
        )
        return oid

    def cancel(self, order_id: int, owner: Optional[str] = None) -> Order:
        order = self.orders.get(order_id)
        if order is None:
            raise UnknownOrder(str(order_id))
        if owner is not None and order.owner != owner:
            raise NotOwner(f"order {order_id} belongs to {order.owner}")
        self._finish(order)
        return order

    def cancel_all(self, owner: str, pair: Optional[str] = None, tag: Optional[str] = None) -> int:
        n = 0
        for o in self.orders_of(owner, pair):
            if tag is None or o.tag == tag:
                self._finish(o)
                n += 1
        return n

    def liquidate(self, pos: Position, limit: int) -> int:
        cfg = self.pairs[pos.pair]
        key = (pos.owner, pos.pair)
        old = self._liq_orders.pop(key, None)
        if old is not None and old in self.orders:
            self._finish(self.orders[old])
        side = pos.side.opposite
        if side is Side.SELL:
            price = max(cfg.tick, floor_to(limit, cfg.tick))
        else:
            price = ceil_to(limit, cfg.tick)
        qty = floor_to(pos.qty, cfg.lot)
        oid = self.submit(pos.owner, side, price, qty, pos.pair, reduce_only=True,
                          tag="liquidation", _liquidation=True)
        self._liq_orders[key] = oid
        return oid

    # -- batch ---------------------------------------------------------------

    def run_batch(self, pair: str = "USD/EXM") -> List[Trade]:
        cfg = self.pairs[pair]
        self._clip_reduce_only(pair)
        orders = [o for o in self.orders.values() if o.pair == pair]
        price, volume = clearing_price(orders, cfg.tick)
        trades: List[Trade] = []
        fills: List[Fill] = []
        if volume:
            buys = [o for o in orders if o.side is Side.BUY and o.price >= price]
            sells = [o for o in orders if o.side is Side.SELL and o.price <= price]
            volume = min(sum(o.remaining for o in buys), sum(o.remaining for o in sells))
            buy_fill = allocate(buys, volume, cfg.lot)
            sell_fill = allocate(sells, volume, cfg.lot)
            trades = self._pair_fills(pair, price, buy_fill, sell_fill)
            fills = self._settle(cfg, trades)
        for o in list(self.orders.values()):
            if o.pair != pair:
                continue
            if o.remaining == 0:
                self._finish(o)
            else:
                o.resting = True
        bid, ask = self.best_bid(pair), self.best_ask(pair)
        if bid is not None and ask is not None and bid >= ask:
            raise InvariantViolation(f"crossed book after batch: {fmt(bid)} >= {fmt(ask)}")
        self.trade_log.extend(trades)
        self.last_trades = trades
        self.events.extend(t.event() for t in trades)
        for listener in self.listeners:
            listener(fills)
        return trades

    def _pair_fills(self, pair: str, price: int, buy_fill: Dict[int, int], sell_fill: Dict[int, int]) -> List[Trade]:
        cfg = self.pairs[pair]
        bq = sorted(buy_fill.items())
        sq = sorted(sell_fill.items())
        trades: List[Trade] = []
        i = j = 0
        bl = bq[0][1] if bq else 0
        sl = sq[0][1] if sq else 0
        while i < len(bq) and j < len(sq):
            q = min(bl, sl)
            b, s = self.orders[bq[i][0]], self.orders[sq[j][0]]
            notional = mul(q, price)
            b_taker, s_taker = not b.resting, not s.resting
            b_fee = bps(notional, cfg.taker_fee_bps) if b_taker else -bps(notional, cfg.maker_rebate_bps)
            s_fee = bps(notional, cfg.taker_fee_bps) if s_taker else -bps(notional, cfg.maker_rebate_bps)
            trades.append(Trade(self.step, pair, price, q, b.id, s.id, b.owner, s.owner,
                                b_taker, s_taker, b_fee, s_fee))
            bl -= q
            sl -= q
            if bl == 0:
                i += 1
                bl = bq[i][1] if i < len(bq) else 0
            if sl == 0:
                j += 1
                sl = sq[j][1] if j < len(sq) else 0
        return trades

    def _settle(self, cfg: PairConfig, trades: List[Trade]) -> List[Fill]:
        per_order: Dict[int, Fill] = {}
        for t in trades:
            sides = [(self.orders[t.buy_order], t.buy_fee), (self.orders[t.sell_order], t.sell_fee)]
            # collect the taker fee before the maker rebate is paid out of FeeSink
            sides.sort(key=lambda s: -s[1])
            for order, fee in sides:
                res = self._apply_fill(order, t.qty, t.price)
                self._charge_fee(order, fee)
                f = per_order.get(order.id)
                if f is None:
                    per_order[order.id] = Fill(order, t.qty, t.price, res)
                else:
                    f.qty += t.qty
                    f.result.closed_qty += res.closed_qty
                    f.result.opened_qty += res.opened_qty
                    f.result.realized += res.realized
                    f.result.payout += res.payout
                    f.result.shortfall += res.shortfall
                    f.result.position = res.position
        return [per_order[k] for k in sorted(per_order)]

    def _apply_fill(self, order: Order, qty: int, price: int) -> FillResult:
        before = self.margin.position(order.owner, order.pair)
        bankruptcy = before.bankruptcy_price if before is not None else None
        closed, opened = self.margin.split(order.owner, order.pair, order.side, qty)
        margin = 0
        if opened:
            margin = required_margin(opened, price, order.leverage)
            if margin > order.hold:
                extra = min(margin - order.hold, self.ledger.free(order.owner))
                if extra:
                    self.ledger.lock(order.owner, EXM, extra, "order_hold")
                    order.hold += extra
                margin = min(margin, order.hold)
            order.hold -= margin
        res = self.margin.open_or_update(order.owner, order.pair, order.side, qty, price, margin,
                                         from_locked=True, check_leverage=False) if margin or closed else None
        if res is None:
            raise InvariantViolation(f"order {order.id} cannot fund its fill")
        order.remaining -= qty
        if order.liquidation:
            self.events.append({
                "type": "liquidation", "step": self.step, "owner": order.owner, "pair": order.pair,
                "side": order.side.opposite.label, "qty": fmt(qty), "fill_price": fmt(price),
                "bankruptcy_price": fmt(bankruptcy) if bankruptcy is not None else None,
                "shortfall": fmt(res.shortfall),
            })
        return res

    def _charge_fee(self, order: Order, fee: int) -> None:
        if fee < 0:
            self.ledger.transfer(FEE_SINK, order.owner, EXM, -fee, "maker_rebate")
            return
        if fee == 0:
            return
        left = fee
        from_hold = min(left, order.hold)
        if from_hold:
            self.ledger.transfer_locked(order.owner, FEE_SINK, EXM, from_hold, "taker_fee")
            order.hold -= from_hold
            left -= from_hold
        from_free = min(left, self.ledger.free(order.owner))
        if from_free:
            self.ledger.transfer(order.owner, FEE_SINK, EXM, from_free, "taker_fee")
            left -= from_free
        if left:
            self.ledger.transfer(RESERVE, FEE_SINK, EXM, left, "taker_fee_backstop")

    def _closable(self, owner: str, pair: str, side: Side, exclude: Optional[int] = None) -> int:
        pos = self.margin.position(owner, pair)
        if pos is None or pos.side is side:
            return 0
        pending = sum(
            o.remaining for o in self.orders.values()
            if o.owner == owner and o.pair == pair and o.reduce_only and o.side is side and o.id != exclude
        )
        return max(0, pos.qty - pending)

    def _clip_reduce_only(self, pair: str) -> None:
        seen: Dict[Tuple[str, Side], int] = {}
        for o in sorted(self.orders.values(), key=lambda o: o.id):
            if o.pair != pair or not o.reduce_only:
                continue
            pos = self.margin.position(o.owner, pair)
            avail = 0 if pos is None or pos.side is o.side else pos.qty
            used = seen.get((o.owner, o.side), 0)
            allowed = max(0, avail - used)
            if o.remaining > allowed:
                o.remaining = floor_to(allowed, self.pairs[pair].lot)
            seen[(o.owner, o.side)] = used + o.remaining
            if o.remaining == 0:
                self._finish(o)

    def _finish(self, order: Order) -> None:
        if order.hold:
            self.ledger.unlock(order.owner, EXM, order.hold, "order_release")
            order.hold = 0
        self.orders.pop(order.id, None)
        if order.liquidation:
            key = (order.owner, order.pair)
            if self._liq_orders.get(key) == order.id:
                del self._liq_orders[key]

    def reserved(self, owner: str) -> int:
        return sum(o.hold for o in self.orders.values() if o.owner == owner)
