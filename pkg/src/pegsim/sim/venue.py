"""Real-world venue: an exogenous mid-price process with infinite depth."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import InsufficientFunds
from ..fixed import SCALE, bps, fp, fp_float, mul, mul_up
from ..ledger import EXM, Ledger

REAL_VENUE = "RealVenue"
TRANSIT = "Transit"
USD = "USD"
PRICE_GRID = 10**10  # real prices are kept to 8 decimals


@dataclass
class PriceProcess:
    """Log-price OU (``theta`` > 0), GBM (``theta`` == 0) or a scripted path."""

    kind: str
    price: int
    mu: float = 0.0
    sigma: float = 0.0
    theta: float = 0.0
    path: Sequence[int] = ()
    rng: Optional[np.random.Generator] = None
    _x: float = field(init=False, default=0.0)
    _level: float = field(init=False, default=0.0)

    def __post_init__(self):
        if self.kind not in ("ou", "gbm", "path"):
            raise ValueError(f"unknown price process {self.kind!r}")
        if self.price <= 0:
            raise ValueError("prices must be positive")
        self._x = math.log(self.price / SCALE)
        self._level = self._x

    def advance(self, step: int) -> int:
        if self.kind == "path":
            if self.path:
                self.price = self.path[min(step, len(self.path) - 1)]
            return self.price
        z = float(self.rng.standard_normal()) if self.rng is not None else 0.0
        if self.kind == "ou":
            self._x += self.theta * (self._level - self._x) + self.sigma * z
        else:
            self._x += self.mu - 0.5 * self.sigma**2 + self.sigma * z
        self.price = max(PRICE_GRID, fp_float(math.exp(self._x)) // PRICE_GRID * PRICE_GRID)
        return self.price

    def jump_to(self, price: int) -> None:
        """Move the price (and, for OU, its long-run level) to ``price``."""
        self.price = price
        self._x = math.log(price / SCALE)
        self._level = self._x
        if self.kind == "path":
            self.path = ()


@dataclass
class PendingTransfer:
    arrive: int
    src: str
    dst: str
    asset: str
    amount: int


class RealVenue:
    def __init__(self, ledger: Ledger, process: PriceProcess, taker_fee_bps: int = 0,
                 transfer_delay: int = 1, volume: int = 1000 * SCALE):
        if transfer_delay < 0:
            raise ValueError("transfer delay must be non-negative")
        self.ledger = ledger
        self.process = process
        self.taker_fee_bps = taker_fee_bps
        self.delay = transfer_delay
        self.volume = volume
        self.pending: List[PendingTransfer] = []
        for acct in (REAL_VENUE, TRANSIT):
            ledger.register(acct)
        ledger.register_asset(USD)

    @property
    def price(self) -> int:
        return self.process.price

    def quotes(self) -> List[Tuple[int, int]]:
        return [(self.price, self.volume)]

    def advance(self, step: int) -> int:
        return self.process.advance(step)

    def trade(self, account: str, side: str, qty: int) -> int:
        """Sell or buy ``qty`` USD against EXM at mid, with the taker fee taken in EXM.

        Returns the EXM received (sell) or paid (buy).
        """
        gross = mul(qty, self.price) if side == "sell" else mul_up(qty, self.price)
        fee = bps(gross, self.taker_fee_bps)
        if side == "sell":
            self.ledger.transfer(account, REAL_VENUE, USD, qty, "real_trade")
            net = gross - fee
            if net > 0:
                self.ledger.transfer(REAL_VENUE, account, EXM, net, "real_trade")
            return net
        if side != "buy":
            raise ValueError("side must be 'sell' or 'buy'")
        cost = gross + fee
        if self.ledger.free(account) < cost:
            raise InsufficientFunds(f"{account} cannot pay {cost} EXM")
        self.ledger.transfer(account, REAL_VENUE, EXM, cost, "real_trade")
        self.ledger.transfer(REAL_VENUE, account, USD, qty, "real_trade")
        return cost

    def send(self, src: str, dst: str, asset: str, amount: int, step: int) -> PendingTransfer:
        """Start a cross-venue transfer; funds sit in Transit until they arrive."""
        self.ledger.transfer(src, TRANSIT, asset, amount, "transfer_out")
        t = PendingTransfer(step + self.delay, src, dst, asset, amount)
        if self.delay == 0:
            self.ledger.transfer(TRANSIT, dst, asset, amount, "transfer_in")
        else:
            self.pending.append(t)
        return t

    def deliver(self, step: int) -> List[PendingTransfer]:
        due = [t for t in self.pending if t.arrive <= step]
        self.pending = [t for t in self.pending if t.arrive > step]
        for t in due:
            self.ledger.transfer(TRANSIT, t.dst, t.asset, t.amount, "transfer_in")
        return due

    def in_transit(self, dst: str) -> dict:
        out: dict = {}
        for t in self.pending:
            if t.dst == dst:
                out[t.asset] = out.get(t.asset, 0) + t.amount
        return out


def make_process(proc: dict, seed: int) -> PriceProcess:
    kind = proc.get("process", "ou")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EA1]))
    path = [fp(x) for x in proc.get("path", [])]
    start = fp(proc.get("initial_price", "100")) if not path else path[0]
    return PriceProcess(kind, start, float(proc.get("mu", 0.0)), float(proc.get("sigma", 0.0)),
                        float(proc.get("theta", 0.0 if kind != "ou" else 0.05)), path, rng)
