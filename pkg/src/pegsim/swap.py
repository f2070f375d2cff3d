"""Swap processor: deviation measurement, rate control and periodic swaps.

Sign convention: a positive rate means shorts pay longs ``qty * index * rate``
EXM per swap. The controller lowers the rate when trades print above the
index and raises it when they print below::

    r <- clamp(r - gain * vwdev, r_min, r_max)
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .errors import MissingIndex
from .fixed import SCALE, bps, fmt, mul
from .ledger import CLEARING, EXM, FEE_SINK, RESERVE
from .margin import LONG, MarginEngine, Position


@dataclass(frozen=True)
class FundingParams:
    gain: int = SCALE // 10
    r_min: int = -SCALE // 20
    r_max: int = SCALE // 20
    swap_period: int = 16
    measure_period: int = 16
    haircut_bps: int = 0

    def __post_init__(self):
        if not self.r_min < 0 < self.r_max:
            raise ValueError("rate clamp must straddle zero")
        if self.gain < 0:
            raise ValueError("controller gain must be non-negative")


@dataclass(frozen=True)
class DeviationSample:
    vwdev: int
    volume: int


@dataclass
class FundingState:
    pair: str
    params: FundingParams = field(default_factory=FundingParams)
    rate: int = 0
    window_trades: List[Tuple[int, int, int]] = field(default_factory=list)  # (price, qty, step)
    last_swap_step: int = 0
    history: List[int] = field(default_factory=list)

    def record(self, price: int, qty: int, step: int) -> None:
        self.window_trades.append((price, qty, step))


@dataclass(frozen=True)
class SwapTransfer:
    owner: str
    side: str
    qty: int
    amount: int  # signed: positive means the position receives


IndexSeries = Union[Mapping[int, int], Callable[[int], Optional[int]]]


def measure(trades: Iterable[Tuple[int, int, int]], index: IndexSeries) -> DeviationSample:
    """Volume-weighted relative deviation of trade prices from the index.

    ``trades`` are (price, qty, step); ``index`` maps a step to the index price
    in force at that step.
    """
    lookup = index if callable(index) else index.get
    num = Fraction(0)
    vol = 0
    for price, qty, step in trades:
        ref = lookup(step)
        if not ref:
            raise MissingIndex(f"no index at step {step}")
        num += Fraction(qty * (price - ref), ref)
        vol += qty
    if vol == 0:
        return DeviationSample(0, 0)
    dev = num / vol
    return DeviationSample((dev.numerator * SCALE) // dev.denominator, vol)


def update_rate(state: FundingState, sample: DeviationSample) -> FundingState:
    p = state.params
    r = state.rate - mul(p.gain, sample.vwdev)
    r = max(p.r_min, min(p.r_max, r))
    return replace(state, rate=r, window_trades=[], history=state.history + [r])


def swap_transfers(
    positions: Sequence[Position], index_price: int, rate: int, haircut_bps: int = 0
) -> Tuple[List[SwapTransfer], int, int]:
    """Compute one swap.

    Returns (transfers, shortfall, remainder): payers are capped at their
    margin and ``shortfall`` is what the Reserve must add; ``remainder`` is the
    rounding dust plus haircut that goes to FeeSink. Transfers, shortfall and
    remainder always net to zero.
    """
    if rate == 0 or not positions:
        return [], 0, 0
    payer_side = -1 if rate > 0 else 1  # shorts pay when rate > 0
    mag = abs(rate)
    payers = [p for p in positions if int(p.side) == payer_side]
    receivers = [p for p in positions if int(p.side) != payer_side]
    out: List[SwapTransfer] = []
    owed_total = 0
    shortfall = 0
    for p in payers:
        owed = mul(mul(p.qty, index_price), mag)
        paid = min(owed, p.margin)
        shortfall += owed - paid
        owed_total += owed
        if paid:
            out.append(SwapTransfer(p.owner, p.side.label, p.qty, -paid))
    if not receivers:
        # one-sided open interest cannot occur in a netted book; refund nothing, keep dust
        return out, shortfall, owed_total - shortfall
    distributable = owed_total - bps(owed_total, haircut_bps)
    recv_qty = sum(p.qty for p in receivers)
    paid_out = 0
    for p in receivers:
        amt = (distributable * p.qty) // recv_qty
        if amt:
            out.append(SwapTransfer(p.owner, p.side.label, p.qty, amt))
            paid_out += amt
    remainder = owed_total - paid_out
    return out, shortfall, remainder


def execute_swap(
    engine: MarginEngine, pair: str, index_price: int, rate: int, haircut_bps: int = 0
) -> Tuple[List[SwapTransfer], int, int]:
    """Apply a swap to every open position of ``pair`` (margins move inside Clearing)."""
    positions = engine.open_positions(pair)
    transfers, shortfall, remainder = swap_transfers(positions, index_price, rate, haircut_bps)
    by_owner = {p.owner: p for p in positions}
    if shortfall:
        engine.ledger.transfer(RESERVE, CLEARING, EXM, shortfall, "swap_shortfall")
    for t in transfers:
        engine.adjust_margin(by_owner[t.owner], t.amount)
    if remainder:
        engine.ledger.transfer(CLEARING, FEE_SINK, EXM, remainder, "swap_remainder")
    return transfers, shortfall, remainder


def funding_event(step: int, state: FundingState, sample: DeviationSample, transfers: Sequence[SwapTransfer],
                  shortfall: int, remainder: int) -> dict:
    paid = -sum(t.amount for t in transfers if t.amount < 0)
    return {
        "type": "funding", "step": step, "pair": state.pair, "vwdev": fmt(sample.vwdev),
        "r": fmt(state.rate), "total_swapped": fmt(paid + shortfall),
        "transfers": [[t.owner, fmt(t.amount)] for t in transfers],
        "shortfall": fmt(shortfall), "remainder": fmt(remainder),
    }
