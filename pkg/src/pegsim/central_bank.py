"""Staking deposits, the long-term EXM rate, interest payment and the solvency monitor."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import InsufficientFunds
from .fixed import SCALE, fmt, mul
from .ledger import CENTRAL_BANK, EXM, FEE_SINK, Ledger


@dataclass
class Stake:
    owner: str
    amount: int
    lock_until: int
    locked: bool = True
    accrued: int = 0
    pledged: int = 0


@dataclass(frozen=True)
class RatePolicy:
    margin_bps: int = 10
    horizon: int = 100
    lock_period: int = 30

    @property
    def margin(self) -> int:
        return self.margin_bps * SCALE // 10_000


@dataclass(frozen=True)
class Payments:
    accruals: Dict[str, int]
    pool_used: int
    minted: int

    @property
    def total(self) -> int:
        return sum(self.accruals.values())


@dataclass(frozen=True)
class SolvencyReport:
    interest: int
    swap_losses: int
    headroom: int
    trailing_headroom: int
    violation: bool


def set_rate(history: Sequence[int], policy: RatePolicy = RatePolicy()) -> int:
    """Long-term rate: average per-period swap cost borne by longs over the horizon, plus a margin.

    Only periods with a negative swap rate cost the (long) Currency Service
    anything; an empty history yields the margin alone.
    """
    window = list(history)[-policy.horizon:] if policy.horizon else []
    if not window:
        return policy.margin
    cost = sum(max(0, -r) for r in window) // len(window)
    return max(0, cost) + policy.margin


def accrue(stakes: Iterable[Tuple[str, int]], rate: int) -> Dict[str, int]:
    out: Dict[str, int] = {}
    for owner, amount in stakes:
        out[owner] = out.get(owner, 0) + mul(amount, rate)
    return out


def accrue_and_pay(
    ledger: Ledger,
    stakes: Iterable[Tuple[str, int]],
    rate: int,
    ops_pool: str = FEE_SINK,
    pay_to: Optional[Dict[str, str]] = None,
) -> Payments:
    """Pay ``amount * rate`` to each (owner, amount) stake, from ``ops_pool`` first, minting the rest."""
    accruals = accrue(stakes, rate)
    pay_to = pay_to or {}
    pool_used = minted = 0
    for owner in sorted(accruals):
        amt = accruals[owner]
        if amt <= 0:
            continue
        dest = pay_to.get(owner, owner)
        from_pool = min(amt, ledger.free(ops_pool))
        if from_pool:
            ledger.transfer(ops_pool, dest, EXM, from_pool, "interest")
            pool_used += from_pool
        rest = amt - from_pool
        if rest:
            ledger.mint(EXM, dest, rest, CENTRAL_BANK, "interest_mint")
            minted += rest
    return Payments(accruals, pool_used, minted)


def solvency_check(
    interest: Sequence[int], swap_losses: Sequence[int], horizon: Optional[int] = None
) -> SolvencyReport:
    """Headroom of interest received over swap losses, per-period series aligned by index."""
    total_i, total_l = sum(interest), sum(swap_losses)
    if horizon:
        trailing = sum(interest[-horizon:]) - sum(swap_losses[-horizon:])
    else:
        trailing = total_i - total_l
    return SolvencyReport(total_i, total_l, total_i - total_l, trailing, trailing < 0)


class CentralBank:
    def __init__(self, ledger: Ledger, policy: RatePolicy = RatePolicy()):
        self.ledger = ledger
        self.policy = policy
        self.stakes: Dict[str, Stake] = {}
        self.rate = policy.margin
        self.interest_series: List[int] = []
        self.swap_loss_series: List[int] = []
        self.events: List[dict] = []

    def deposit(self, owner: str, amount: int, step: int, lock: bool = True) -> Stake:
        self.ledger.lock(owner, EXM, amount, "stake")
        st = self.stakes.get(owner)
        until = step + self.policy.lock_period if lock else step
        if st is None:
            st = self.stakes[owner] = Stake(owner, amount, until, lock)
        else:
            st.amount += amount
            st.lock_until = max(st.lock_until, until)
            st.locked = st.locked or lock
        return st

    def release(self, owner: str, step: int) -> int:
        """Return the unpledged part of a matured (or never locked) stake to free balance."""
        st = self.stakes.get(owner)
        if st is None:
            return 0
        if st.locked and step < st.lock_until:
            raise InsufficientFunds(f"stake of {owner} is locked until step {st.lock_until}")
        amt = min(st.amount - st.pledged, self.ledger.locked(owner))
        if amt > 0:
            self.ledger.unlock(owner, EXM, amt, "unstake")
        del self.stakes[owner]
        return amt

    def pledge(self, owner: str, amount: int) -> int:
        """Make part of a stake spendable as exchange margin; it keeps earning interest."""
        st = self.stakes.get(owner)
        if st is None:
            return 0
        amt = min(amount, st.amount - st.pledged, self.ledger.locked(owner))
        if amt > 0:
            self.ledger.unlock(owner, EXM, amt, "stake_pledge")
            st.pledged += amt
        return max(amt, 0)

    def slashed(self, owner: str, amount: int) -> None:
        st = self.stakes.get(owner)
        if st is not None:
            st.amount = max(0, st.amount - amount)

    def deposit_of(self, owner: str) -> int:
        st = self.stakes.get(owner)
        return st.amount - st.pledged if st else 0

    def update_rate(self, swap_history: Sequence[int]) -> int:
        self.rate = set_rate(swap_history, self.policy)
        return self.rate

    def earning_stakes(self, step: int) -> List[Tuple[str, int]]:
        return [(o, s.amount) for o, s in sorted(self.stakes.items()) if s.locked and s.amount > 0]

    def pay_interest(self, step: int, extra: Iterable[Tuple[str, int]] = ()) -> Payments:
        stakes = self.earning_stakes(step) + list(extra)
        pay = accrue_and_pay(self.ledger, stakes, self.rate)
        for owner, amt in pay.accruals.items():
            if owner in self.stakes:
                self.stakes[owner].accrued += amt
        self.events.append({
            "type": "rate", "step": step, "R_E": fmt(self.rate),
            "pool_used": fmt(pay.pool_used), "minted": fmt(pay.minted),
        })
        return pay

    def record_currency_service(self, interest: int, swap_loss: int) -> None:
        self.interest_series.append(interest)
        self.swap_loss_series.append(swap_loss)

    def solvency(self) -> SolvencyReport:
        return solvency_check(self.interest_series, self.swap_loss_series, self.policy.horizon)
