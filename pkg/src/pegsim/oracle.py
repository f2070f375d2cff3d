"""Index price and Schelling-point reporter rounds."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import InsufficientReporters, NoVenueData
from .fixed import SCALE, fmt, mul
from .ledger import EXM, FEE_SINK, Ledger
from .margin import IndexQuote


@dataclass(frozen=True)
class ReporterSet:
    sample_size: int = 7
    tolerance: int = SCALE // 100
    reward: int = SCALE // 10
    slash: int = 10 * SCALE
    min_deposit: int = 100 * SCALE

    def __post_init__(self):
        if self.sample_size < 3 or self.sample_size % 2 == 0:
            raise ValueError("sample size must be odd and at least 3")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.slash > self.min_deposit:
            raise ValueError("slash may not exceed the minimum eligible deposit")


@dataclass
class RoundResult:
    aggregate: int
    sampled: List[str]
    reports: Dict[str, int]
    rewards: Dict[str, int] = field(default_factory=dict)
    slashes: Dict[str, int] = field(default_factory=dict)

    def event(self, step: int, pair: str) -> dict:
        return {
            "type": "oracle", "step": step, "pair": pair, "sampled": self.sampled,
            "reports": {k: fmt(v) for k, v in self.reports.items()},
            "aggregate": fmt(self.aggregate),
            "rewards": {k: fmt(v) for k, v in self.rewards.items()},
            "slashes": {k: fmt(v) for k, v in self.slashes.items()},
        }


def compute_index(venue_quotes: Sequence[Tuple[int, int]], pair: str = "USD/EXM", step: int = 0) -> IndexQuote:
    """Volume-weighted average of venue prices (rounded down)."""
    vol = sum(v for _, v in venue_quotes if v > 0)
    if vol == 0:
        raise NoVenueData("no venue reported positive volume")
    num = sum(p * v for p, v in venue_quotes if v > 0)
    return IndexQuote(pair, num // vol, step, vol)


def median(values: Sequence[int]) -> int:
    s = sorted(values)
    n = len(s)
    if n % 2:
        return s[n // 2]
    return (s[n // 2 - 1] + s[n // 2]) // 2


def sample_reporters(eligible: Sequence[str], n: int, seed: int, step: int) -> List[str]:
    """Uniform sample without replacement, a pure function of (seed, step)."""
    pool = sorted(eligible)
    if len(pool) < n:
        raise InsufficientReporters(f"{len(pool)} eligible reporters, need {n}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, step, 0x0AC1E]))
    idx = rng.choice(len(pool), size=n, replace=False)
    return [pool[i] for i in sorted(idx)]


def within_band(report: int, center: int, tolerance: int) -> bool:
    return abs(report - center) * SCALE <= tolerance * center


def schelling_round(
    reports: Mapping[str, int],
    params: ReporterSet,
    ledger: Optional[Ledger] = None,
    on_slash: Optional[Callable[[str, int], None]] = None,
) -> RoundResult:
    """Aggregate reports by median; reward agreement, slash outliers.

    Slashes come out of the reporter's locked deposit (never below zero) and
    go to FeeSink before any reward is paid from it.
    """
    if len(reports) < params.sample_size:
        raise InsufficientReporters(f"{len(reports)} reports, need {params.sample_size}")
    agg = median(list(reports.values()))
    res = RoundResult(agg, sorted(reports), dict(reports))
    honest = [a for a in sorted(reports) if within_band(reports[a], agg, params.tolerance)]
    cheats = [a for a in sorted(reports) if a not in honest]
    for acct in cheats:
        amt = params.slash
        if ledger is not None:
            amt = min(amt, ledger.locked(acct))
            if amt:
                ledger.transfer_locked(acct, FEE_SINK, EXM, amt, "oracle_slash")
        if on_slash is not None and amt:
            on_slash(acct, amt)
        res.slashes[acct] = amt
    for acct in honest:
        amt = params.reward
        if ledger is not None:
            amt = min(amt, ledger.free(FEE_SINK))
            if amt:
                ledger.transfer(FEE_SINK, acct, EXM, amt, "oracle_reward")
        res.rewards[acct] = amt
    return res


@dataclass
class Oracle:
    """Runs one reporter round per step and keeps the resulting index series."""

    pair: str
    params: ReporterSet
    seed: int
    history: Dict[int, int] = field(default_factory=dict)
    last: Optional[IndexQuote] = None

    def round(
        self,
        step: int,
        venue_quotes: Sequence[Tuple[int, int]],
        eligible: Sequence[str],
        report_fn: Callable[[str, int], int],
        ledger: Optional[Ledger] = None,
        on_slash: Optional[Callable[[str, int], None]] = None,
    ) -> Tuple[IndexQuote, RoundResult]:
        true_index = compute_index(venue_quotes, self.pair, step)
        sampled = sample_reporters(eligible, self.params.sample_size, self.seed, step)
        reports = {a: report_fn(a, true_index.price) for a in sampled}
        res = schelling_round(reports, self.params, ledger, on_slash)
        quote = IndexQuote(self.pair, res.aggregate, step, true_index.source_volume)
        self.publish(quote)
        return quote, res

    def publish(self, quote: IndexQuote) -> None:
        self.history[quote.step] = quote.price
        self.last = quote

    def price_at(self, step: int) -> Optional[int]:
        return self.history.get(step)
