"""Arbitrage round trips executed through the real protocol components.

Each round trip opens and closes one unit of USD notional on a fee-free
exchange (tick and lot of one ulp), applies one swap at the exit index and
converts through a fee-free real venue. The measured flows are then compared
with the closed forms in :mod:`pegsim.agents.stability`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional

import numpy as np

from ..agents.stability import case1_profitable, case2_profitable
from ..exchange import Exchange, PairConfig
from ..fixed import SCALE, div, mul, mul_up
from ..ledger import EXM, RESERVE, Ledger
from ..margin import MarginEngine, MarginParams, Side
from ..swap import execute_swap
from .venue import USD, PriceProcess, RealVenue

PAIR = "USD/EXM"
TRADER = "arb"
COUNTERPARTY = "cp"
FUND = 10**6 * SCALE


@dataclass(frozen=True)
class Quotes:
    a0: int
    b0: int
    at: int
    bt: int
    r: int
    R: int  # R_D for case 1, R_E for case 2


@dataclass(frozen=True)
class Outcome:
    flow: Fraction  # measured net flow (USD for case 1, EXM for case 2)
    expected: Fraction
    scale: Fraction  # round-trip notional in the same unit
    profitable: bool
    predicted: bool

    @property
    def rel_error(self) -> Fraction:
        return abs(self.flow - self.expected) / self.scale


class _Env:
    def __init__(self, a0: int):
        self.ledger = Ledger()
        self.ledger.record = False
        self.margin = MarginEngine(self.ledger, {PAIR: MarginParams(max_leverage=SCALE)})
        self.ex = Exchange(self.ledger, self.margin, [PairConfig(tick=1, lot=1, taker_fee_bps=0, maker_rebate_bps=0)])
        self.venue = RealVenue(self.ledger, PriceProcess("path", a0), taker_fee_bps=0, transfer_delay=0)
        for acct in (TRADER, COUNTERPARTY):
            self.ledger.register(acct)
        self.ledger.genesis(COUNTERPARTY, EXM, FUND)
        self.ledger.genesis(RESERVE, EXM, FUND)
        self.ledger.genesis("RealVenue", EXM, FUND)
        self.ledger.genesis("RealVenue", USD, FUND)

    def cross(self, side: Side, price: int, qty: int, reduce_only: bool = False) -> None:
        self.ex.submit(COUNTERPARTY, side.opposite, price, qty, PAIR, leverage=SCALE,
                       reduce_only=reduce_only)
        self.ex.submit(TRADER, side, price, qty, PAIR, leverage=SCALE, reduce_only=reduce_only)
        trades = self.ex.run_batch(PAIR)
        if sum(t.qty for t in trades) != qty or any(t.price != price for t in trades):
            raise AssertionError("round-trip leg did not fill in full at the quoted price")

    def holdings(self, asset: str) -> int:
        return self.ledger.balance(TRADER, asset).total


def case1_roundtrip(t: Quotes) -> Outcome:
    """Sell b0/a0 USD, go long one USD virtually, collect one swap, unwind."""
    env = _Env(t.a0)
    usd0 = div(t.b0, t.a0)
    env.ledger.genesis(TRADER, USD, usd0)
    env.ledger.genesis(TRADER, EXM, SCALE)  # rounding buffer for the margin post
    start_usd, start_exm = env.holdings(USD), env.holdings(EXM)

    env.venue.trade(TRADER, "sell", usd0)
    env.cross(Side.BUY, t.b0, SCALE)
    env.venue.process.jump_to(t.at)
    execute_swap(env.margin, PAIR, t.at, t.r)
    env.cross(Side.SELL, t.bt, SCALE, reduce_only=True)
    spare = env.holdings(EXM) - start_exm
    qty = div(spare, t.at) if spare > 0 else 0
    if qty and mul_up(qty, t.at) > spare:
        qty -= 1
    if qty > 0:
        env.venue.trade(TRADER, "buy", qty)

    d_usd = env.holdings(USD) - start_usd
    d_exm = env.holdings(EXM) - start_exm
    flow = Fraction(d_usd, SCALE) + Fraction(d_exm, t.at)
    a0, b0, at, bt, r, R = (Fraction(x, SCALE) for x in (t.a0, t.b0, t.at, t.bt, t.r, t.R))
    expected = r + bt / at - b0 / a0
    d0, dt = (b0 - a0) / a0, (bt - at) / at
    # profit net of the carry on the USD sold at entry
    profit = flow - (b0 / a0) * R
    return Outcome(flow, expected, b0 / a0, profit > 0, case1_profitable(d0, dt, r, R))


def case2_roundtrip(t: Quotes) -> Outcome:
    """Buy b0/(a0(1+R_E)) USD, short one USD against staked EXM, collect one swap, unwind."""
    env = _Env(t.a0)
    a0, b0, at, bt, r, R = (Fraction(x, SCALE) for x in (t.a0, t.b0, t.at, t.bt, t.r, t.R))
    usd = b0 / (a0 * (1 + R))
    usd_fp = usd.numerator * SCALE // usd.denominator
    stake = mul(SCALE, t.b0) + SCALE
    cost = -(-usd_fp * t.a0 // SCALE)
    env.ledger.genesis(TRADER, EXM, stake + cost)
    start_exm, start_usd = env.holdings(EXM), env.holdings(USD)

    env.venue.trade(TRADER, "buy", usd_fp)
    env.cross(Side.SELL, t.b0, SCALE)
    env.venue.process.jump_to(t.at)
    execute_swap(env.margin, PAIR, t.at, t.r)
    env.cross(Side.BUY, t.bt, SCALE, reduce_only=True)
    env.venue.trade(TRADER, "sell", usd_fp)

    d_exm = env.holdings(EXM) - start_exm
    d_usd = env.holdings(USD) - start_usd
    flow = Fraction(d_exm, SCALE) + d_usd * at / SCALE
    expected = at * (b0 / (a0 * (1 + R)) + abs(r)) + b0 - bt - b0 / (1 + R)
    d0, dt = (b0 - a0) / a0, (bt - at) / at
    # out-of-pocket EXM b0/(1+R_E) would otherwise have earned R_E
    profit = flow - b0 / (1 + R) * R
    return Outcome(flow, expected, b0 / (1 + R), profit > 0, case2_profitable(d0, dt, r, R))


def random_tuples(seed: int, n: int, case: int) -> Iterator[Quotes]:
    """Random (a0, b0, at, bt, r, R) on a 6-decimal grid.

    Case 1 uses d0 < 0 and either sign of r; case 2 uses d0 > 0 and r <= 0.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, case, 0x7AB]))
    unit = SCALE // 10**6

    def grid(lo: float, hi: float) -> int:
        return int(round(rng.uniform(lo, hi) * 10**6)) * unit

    for _ in range(n):
        a0 = grid(50, 200)
        d0 = grid(-0.2, -0.000001) if case == 1 else grid(0.000001, 0.2)
        b0 = a0 + mul(a0, d0) // unit * unit
        at = a0 + mul(a0, grid(-0.2, 0.2)) // unit * unit
        bt = at + mul(at, grid(-0.2, 0.2)) // unit * unit
        r = grid(-0.05, 0.05) if case == 1 else grid(-0.05, 0.0)
        R = grid(0.0, 0.02)
        yield Quotes(a0, b0, at, bt, r, R)


def check(seed: int = 0, n: int = 10_000, case: int = 1, tol: Fraction = Fraction(1, 10**9)) -> Optional[str]:
    """Run ``n`` round trips; return a description of the first failure, or None."""
    run = case1_roundtrip if case == 1 else case2_roundtrip
    for i, t in enumerate(random_tuples(seed, n, case)):
        out = run(t)
        if out.rel_error > tol:
            return f"tuple {i} {t}: flow {float(out.flow)} vs closed form {float(out.expected)}"
        if out.profitable != out.predicted:
            return f"tuple {i} {t}: realized profit sign disagrees with the profitability condition"
    return None
