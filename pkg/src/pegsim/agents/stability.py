"""Cross-venue arbitrage conditions.

Notation: ``a`` is the real-world price and ``b`` the virtual price of USD in
EXM, ``d = (b - a) / a`` the spread, ``r`` the swap rate (positive: shorts pay
longs ``a * r`` EXM per USD), ``R_D`` / ``R_E`` the risk-free returns of USD /
EXM over the holding horizon.

Case 1 (virtual price low, d0 < 0): sell ``b0/a0`` USD for ``b0`` EXM at the
real venue, hold a fully-backed long of 1 USD on the virtual venue, then
unwind. Profitable iff ``d_t > -r + d0 + R_D (1 + d0)``.

Case 2 (virtual price high, d0 > 0): sell ``b0/(1+R_E)`` EXM for USD at the
real venue and short 1 USD on the virtual venue against staked EXM.
Profitable iff ``|r| > d_t - d0/(1+R_E) + R_E/(1+R_E)``.

The functions here are generic over numeric types: pass ``Fraction`` for exact
work or ``float`` for modeling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple, Union

from ..errors import InsufficientCapital, WrongRegime

Num = Union[int, float, Fraction]


def spread(a: Num, b: Num) -> Num:
    if a <= 0:
        raise ValueError("real-world price must be positive")
    if isinstance(a, int) and isinstance(b, int):
        return Fraction(b - a, a)
    return (b - a) / a


# -- spread models ---------------------------------------------------------


@dataclass(frozen=True)
class SpreadModel:
    """Discrete distribution of the future spread d_t."""

    points: Tuple[float, ...]
    masses: Tuple[float, ...]

    def __post_init__(self):
        if len(self.points) != len(self.masses) or not self.points:
            raise ValueError("points and masses must be non-empty and aligned")
        if any(m < 0 for m in self.masses):
            raise ValueError("masses must be non-negative")
        if abs(math.fsum(self.masses) - 1.0) > 1e-12:
            raise ValueError("masses must sum to 1")
        if min(self.points) < -1:
            raise ValueError("spread cannot fall below -1")

    @classmethod
    def discrete(cls, dist) -> "SpreadModel":
        items = sorted(dict(dist).items())
        return cls(tuple(float(x) for x, _ in items), tuple(float(m) for _, m in items))

    @classmethod
    def point(cls, x: float) -> "SpreadModel":
        return cls((float(x),), (1.0,))

    @classmethod
    def gaussian(cls, mean: float, sigma: float, bins: int = 201, lo: float = -1.0,
                 hi: float = 1.0) -> "SpreadModel":
        """Normal(mean, sigma^2) binned onto ``bins`` centers spanning [lo, hi].

        Tail mass beyond the outer bin edges is folded into the end bins.
        """
        if sigma <= 0:
            return cls.point(min(max(mean, lo), hi))
        step = (hi - lo) / (bins - 1)
        centers = [lo + i * step for i in range(bins)]
        edges = [-math.inf] + [c + step / 2 for c in centers[:-1]] + [math.inf]

        def cdf(x):
            if x == -math.inf:
                return 0.0
            if x == math.inf:
                return 1.0
            return 0.5 * math.erfc(-(x - mean) / (sigma * math.sqrt(2)))

        raw = [max(0.0, cdf(edges[i + 1]) - cdf(edges[i])) for i in range(bins)]
        total = math.fsum(raw)
        return cls(tuple(centers), tuple(m / total for m in raw))

    @classmethod
    def mean_reverting(cls, d0: float, lam: float, sigma: float, t: float = 1.0,
                       bins: int = 201) -> "SpreadModel":
        """Forecast N(d0 * exp(-lam * t), sigma^2); the mean is kept to 1e-6 so fits can be reused."""
        return _cached_gaussian(round(d0 * math.exp(-lam * t), 6), sigma, bins)

    def mean(self) -> float:
        return math.fsum(x * m for x, m in zip(self.points, self.masses))

    def mass_above(self, q: float) -> float:
        return math.fsum(m for x, m in zip(self.points, self.masses) if x > q)

    def mass_below(self, q: float) -> float:
        return math.fsum(m for x, m in zip(self.points, self.masses) if x < q)


@lru_cache(maxsize=4096)
def _cached_gaussian(mean: float, sigma: float, bins: int) -> SpreadModel:
    return SpreadModel.gaussian(mean, sigma, bins)


# -- case 1 ------------------------------------------------------------------


def case1_threshold(d0: Num, r: Num, R_D: Num = 0) -> Num:
    """Q(r): the future spread must exceed this for case 1 to pay."""
    if d0 >= 0:
        raise WrongRegime("case 1 needs a negative spread")
    return -r + d0 + R_D * (1 + d0)


def case1_profitable(d0: Num, dt: Num, r: Num, R_D: Num = 0) -> bool:
    return dt > case1_threshold(d0, r, R_D)


def participant_fraction(model: SpreadModel, r: float, d0: float, R_D: float = 0.0) -> float:
    """V(r): share of modeled outcomes in which case 1 is profitable."""
    return model.mass_above(case1_threshold(d0, r, R_D))


def case1_flow(a0: Num, b0: Num, at: Num, bt: Num, r: Num) -> Tuple[Num, Num]:
    """(USD out at entry, USD in at exit) per USD of virtual long."""
    return _ratio(b0, a0), r + _ratio(bt, at)


def case1_profit(a0: Num, b0: Num, at: Num, bt: Num, r: Num, R_D: Num = 0) -> Num:
    out, inflow = case1_flow(a0, b0, at, bt, r)
    return inflow - out * (1 + R_D)


# -- case 2 ------------------------------------------------------------------


def case2_threshold(d0: Num, dt: Num, R_E: Num = 0) -> Num:
    """Minimum |r| for case 2 to pay (shorts collect |r| only when r <= 0)."""
    if d0 <= 0:
        raise WrongRegime("case 2 needs a positive spread")
    return dt - d0 / (1 + R_E) + R_E / (1 + R_E)


def case2_profitable(d0: Num, dt: Num, r: Num, R_E: Num = 0) -> bool:
    earned = -r  # positive when shorts are paid
    return earned > case2_threshold(d0, dt, R_E)


def case2_dt_bound(d0: float, r: float, R_E: float = 0.0) -> float:
    """Case 2 pays iff d_t is strictly below this value."""
    if d0 <= 0:
        raise WrongRegime("case 2 needs a positive spread")
    return -r + d0 / (1 + R_E) - R_E / (1 + R_E)


def case2_fraction(model: SpreadModel, r: float, d0: float, R_E: float = 0.0) -> float:
    return model.mass_below(case2_dt_bound(d0, r, R_E))


def case2_flow(a0: Num, b0: Num, at: Num, bt: Num, r: Num, R_E: Num = 0) -> Tuple[Num, Num]:
    """(EXM out at entry, EXM in at exit) per USD of virtual short."""
    out = b0 / (1 + R_E)
    inflow = at * (_ratio(b0, a0) / (1 + R_E) - r) + b0 - bt
    return out, inflow


def case2_profit(a0: Num, b0: Num, at: Num, bt: Num, r: Num, R_E: Num = 0) -> Num:
    out, inflow = case2_flow(a0, b0, at, bt, r, R_E)
    return inflow - out * (1 + R_E)


def _ratio(x: Num, y: Num) -> Num:
    if isinstance(x, int) and isinstance(y, int):
        return Fraction(x, y)
    return x / y


# -- plans -------------------------------------------------------------------


@dataclass(frozen=True)
class Action:
    venue: str  # "real" | "virtual" | "transfer"
    kind: str
    asset: str
    amount: Num
    price: Optional[Num] = None


@dataclass
class Plan:
    case: int
    qty: Num
    entry: List[Action] = field(default_factory=list)
    exit: List[Action] = field(default_factory=list)
    flow_out: Num = 0
    flow_in: Optional[Num] = None
    unit: str = "USD"


def execute_case1(capital_usd: Num, qty: Num, a0: Num, b0: Num) -> Plan:
    usd = qty * _ratio(b0, a0)
    if usd > capital_usd:
        raise InsufficientCapital(f"case 1 needs {usd} USD, have {capital_usd}")
    exm = qty * b0
    return Plan(1, qty, [
        Action("real", "sell", "USD", usd, a0),
        Action("transfer", "to_virtual", "EXM", exm),
        Action("virtual", "long", "USD", qty, b0),
    ], flow_out=usd, unit="USD")


def unwind_case1(plan: Plan, at: Num, bt: Num, r: Num) -> Plan:
    q = plan.qty
    exm = q * (bt + at * r)
    plan.exit = [
        Action("virtual", "swap", "EXM", q * at * r),
        Action("virtual", "close_long", "USD", q, bt),
        Action("transfer", "to_real", "EXM", exm),
        Action("real", "buy", "USD", _ratio(exm, at), at),
    ]
    plan.flow_in = q * (r + _ratio(bt, at))
    return plan


def execute_case2(staked_exm: Num, capital_exm: Num, qty: Num, a0: Num, b0: Num, R_E: Num = 0,
                  margin: Optional[Num] = None) -> Plan:
    exm = qty * b0 / (1 + R_E)
    if exm > capital_exm:
        raise InsufficientCapital(f"case 2 needs {exm} EXM at the real venue, have {capital_exm}")
    need = qty * b0 if margin is None else margin
    if need > staked_exm:
        raise InsufficientCapital(f"case 2 short needs {need} EXM margin from stake, have {staked_exm}")
    return Plan(2, qty, [
        Action("real", "buy", "USD", exm / a0, a0),
        Action("virtual", "short", "USD", qty, b0),
    ], flow_out=exm, unit="EXM")


def unwind_case2(plan: Plan, a0: Num, b0: Num, at: Num, bt: Num, r: Num, R_E: Num = 0) -> Plan:
    q = plan.qty
    usd = q * _ratio(b0, a0) / (1 + R_E)
    plan.exit = [
        Action("real", "sell", "USD", usd, at),
        Action("virtual", "swap", "EXM", -q * at * r),
        Action("virtual", "close_short", "USD", q, bt),
    ]
    plan.flow_in = q * case2_flow(a0, b0, at, bt, r, R_E)[1]
    return plan
