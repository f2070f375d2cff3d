"""Balance ledger: the single source of truth for every asset holding.

All mutations go through :class:`Ledger` methods, each of which appends a
balance-change event to the journal. Conservation per asset is an exact
integer identity::

    sum(free + locked) == initial_supply + minted_total - burned_total
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from .errors import InsufficientFunds, InvariantViolation, UnauthorizedMinter, UnknownAccount, UnknownAsset
from .fixed import fmt

EXM = "EXM"
USD = "USD"
USDE = "USDE"

FEE_SINK = "FeeSink"
RESERVE = "Reserve"
CURRENCY_SERVICE = "CurrencyService"
CENTRAL_BANK = "CentralBank"
CLEARING = "Clearing"

SYSTEM_ACCOUNTS = (FEE_SINK, RESERVE, CURRENCY_SERVICE, CENTRAL_BANK, CLEARING)


@dataclass
class Balance:
    free: int = 0
    locked: int = 0

    @property
    def total(self) -> int:
        return self.free + self.locked


@dataclass(frozen=True)
class Receipt:
    account: str
    asset: str
    free: int
    locked: int
    reason: str


@dataclass(frozen=True)
class LedgerSnapshot:
    balances: Mapping[Tuple[str, str], Tuple[int, int]]
    initial_supply: Mapping[str, int]
    minted_total: Mapping[str, int]
    burned_total: Mapping[str, int]

    def supply(self, asset: str) -> int:
        return sum(f + l for (_, a), (f, l) in self.balances.items() if a == asset)

    def conserved(self) -> bool:
        assets = set(self.initial_supply) | {a for _, a in self.balances}
        for asset in assets:
            expected = (
                self.initial_supply.get(asset, 0)
                + self.minted_total.get(asset, 0)
                - self.burned_total.get(asset, 0)
            )
            if self.supply(asset) != expected:
                return False
        return all(f >= 0 and l >= 0 for f, l in self.balances.values())


class Ledger:
    """Integer-exact multi-asset ledger with free and locked sub-balances."""

    def __init__(self, minters: Optional[Mapping[str, str]] = None):
        self._balances: Dict[str, Dict[str, Balance]] = {}
        self._assets: set[str] = set()
        self.initial_supply: Dict[str, int] = defaultdict(int)
        self.minted_total: Dict[str, int] = defaultdict(int)
        self.burned_total: Dict[str, int] = defaultdict(int)
        # asset -> the only account allowed to mint/burn it
        self.minters: Dict[str, str] = dict(minters or {EXM: CENTRAL_BANK, USDE: CURRENCY_SERVICE})
        self.step = 0
        self.record = True
        self.journal: List[dict] = []
        for acct in SYSTEM_ACCOUNTS:
            self.register(acct)
        for asset in (EXM, USDE):
            self.register_asset(asset)

    # -- registration -------------------------------------------------------

    def register_asset(self, asset: str) -> None:
        if not asset:
            raise ValueError("asset symbol must be non-empty")
        self._assets.add(asset)

    def register(self, account: str) -> None:
        if not account:
            raise ValueError("account id must be non-empty")
        self._balances.setdefault(account, {})

    def has_account(self, account: str) -> bool:
        return account in self._balances

    @property
    def accounts(self) -> List[str]:
        return list(self._balances)

    def genesis(self, account: str, asset: str, amt: int) -> None:
        """Allocate part of an asset's initial supply."""
        if amt < 0:
            raise ValueError("genesis allocation must be non-negative")
        self._check(account, asset)
        self._bal(account, asset).free += amt
        self.initial_supply[asset] += amt
        self._log(account, asset, amt, 0, "genesis", "genesis")

    # -- reads --------------------------------------------------------------

    def balance(self, account: str, asset: str) -> Balance:
        self._check(account, asset)
        b = self._balances[account].get(asset)
        return Balance(b.free, b.locked) if b else Balance()

    def free(self, account: str, asset: str = EXM) -> int:
        return self.balance(account, asset).free

    def locked(self, account: str, asset: str = EXM) -> int:
        return self.balance(account, asset).locked

    def total_supply(self, asset: str) -> int:
        return sum(b[asset].total for b in self._balances.values() if asset in b)

    def snapshot(self) -> LedgerSnapshot:
        bal = {
            (acct, asset): (b.free, b.locked)
            for acct, assets in self._balances.items()
            for asset, b in assets.items()
        }
        return LedgerSnapshot(
            balances=MappingProxyType(bal),
            initial_supply=MappingProxyType(dict(self.initial_supply)),
            minted_total=MappingProxyType(dict(self.minted_total)),
            burned_total=MappingProxyType(dict(self.burned_total)),
        )

    def check_conservation(self) -> None:
        for asset in self._assets:
            expected = self.initial_supply[asset] + self.minted_total[asset] - self.burned_total[asset]
            actual = self.total_supply(asset)
            if actual != expected:
                raise InvariantViolation(f"{asset}: supply {actual} != expected {expected}")
        for acct, assets in self._balances.items():
            for asset, b in assets.items():
                if b.free < 0 or b.locked < 0:
                    raise InvariantViolation(f"negative balance {acct}/{asset}")

    # -- mutations ----------------------------------------------------------

    def transfer(self, src: str, dst: str, asset: str, amt: int, reason: str = "transfer") -> Receipt:
        self._positive(amt)
        self._check(src, asset)
        self._check(dst, asset)
        sb = self._bal(src, asset)
        if sb.free < amt:
            raise InsufficientFunds(f"{src} has {fmt(sb.free)} {asset} free, needs {fmt(amt)}")
        sb.free -= amt
        self._bal(dst, asset).free += amt
        self._log(src, asset, -amt, 0, reason)
        self._log(dst, asset, amt, 0, reason)
        return Receipt(src, asset, sb.free, sb.locked, reason)

    def transfer_locked(self, src: str, dst: str, asset: str, amt: int, reason: str = "transfer") -> Receipt:
        """Move ``amt`` out of ``src``'s locked balance into ``dst``'s free balance."""
        self._positive(amt)
        self._check(src, asset)
        self._check(dst, asset)
        sb = self._bal(src, asset)
        if sb.locked < amt:
            raise InsufficientFunds(f"{src} has {fmt(sb.locked)} {asset} locked, needs {fmt(amt)}")
        sb.locked -= amt
        self._bal(dst, asset).free += amt
        self._log(src, asset, 0, -amt, reason)
        self._log(dst, asset, amt, 0, reason)
        return Receipt(src, asset, sb.free, sb.locked, reason)

    def lock(self, account: str, asset: str, amt: int, reason: str = "lock") -> Receipt:
        self._positive(amt)
        self._check(account, asset)
        b = self._bal(account, asset)
        if b.free < amt:
            raise InsufficientFunds(f"{account} cannot lock {fmt(amt)} {asset}; free {fmt(b.free)}")
        b.free -= amt
        b.locked += amt
        self._log(account, asset, -amt, amt, reason)
        return Receipt(account, asset, b.free, b.locked, reason)

    def unlock(self, account: str, asset: str, amt: int, reason: str = "unlock") -> Receipt:
        self._positive(amt)
        self._check(account, asset)
        b = self._bal(account, asset)
        if b.locked < amt:
            raise InsufficientFunds(f"{account} cannot unlock {fmt(amt)} {asset}; locked {fmt(b.locked)}")
        b.locked -= amt
        b.free += amt
        self._log(account, asset, amt, -amt, reason)
        return Receipt(account, asset, b.free, b.locked, reason)

    def mint(self, asset: str, to: str, amt: int, caller: str, reason: str = "mint") -> Receipt:
        self._positive(amt)
        self._check(to, asset)
        if self.minters.get(asset) != caller:
            raise UnauthorizedMinter(f"{caller} may not mint {asset}")
        b = self._bal(to, asset)
        b.free += amt
        self.minted_total[asset] += amt
        self._log(to, asset, amt, 0, reason, "mint")
        return Receipt(to, asset, b.free, b.locked, reason)

    def burn(self, asset: str, frm: str, amt: int, caller: str, reason: str = "burn") -> Receipt:
        self._positive(amt)
        self._check(frm, asset)
        if self.minters.get(asset) != caller:
            raise UnauthorizedMinter(f"{caller} may not burn {asset}")
        b = self._bal(frm, asset)
        if b.free < amt:
            raise InsufficientFunds(f"{frm} has {fmt(b.free)} {asset}, cannot burn {fmt(amt)}")
        b.free -= amt
        self.burned_total[asset] += amt
        self._log(frm, asset, -amt, 0, reason, "burn")
        return Receipt(frm, asset, b.free, b.locked, reason)

    def drain_journal(self) -> List[dict]:
        out, self.journal = self.journal, []
        return out

    # -- internals ----------------------------------------------------------

    def _check(self, account: str, asset: str) -> None:
        if account not in self._balances:
            raise UnknownAccount(account)
        if asset not in self._assets:
            raise UnknownAsset(asset)

    @staticmethod
    def _positive(amt: int) -> None:
        if not isinstance(amt, int) or isinstance(amt, bool):
            raise TypeError(f"amounts are fixed-point ints, got {type(amt).__name__}")
        if amt <= 0:
            raise ValueError("amount must be positive")

    def _bal(self, account: str, asset: str) -> Balance:
        assets = self._balances[account]
        b = assets.get(asset)
        if b is None:
            b = assets[asset] = Balance()
        return b

    def _log(self, account: str, asset: str, dfree: int, dlocked: int, reason: str,
             op: str = "move") -> None:
        if not self.record:
            return
        if dfree:
            self.journal.append(
                {"type": "balance", "step": self.step, "op": op, "account": account, "asset": asset,
                 "bucket": "free", "delta": fmt(dfree), "reason": reason}
            )
        if dlocked:
            self.journal.append(
                {"type": "balance", "step": self.step, "op": op, "account": account, "asset": asset,
                 "bucket": "locked", "delta": fmt(dlocked), "reason": reason}
            )


def replay_balances(events: Iterable[dict]) -> Dict[Tuple[str, str, str], int]:
    """Rebuild (account, asset, bucket) -> balance from a balance-change event stream."""
    from .fixed import parse

    out: Dict[Tuple[str, str, str], int] = defaultdict(int)
    for ev in events:
        out[(ev["account"], ev["asset"], ev["bucket"])] += parse(ev["delta"])
    return out
