"""Fixed-point helpers.

Every amount, price and rate in protocol state is a plain ``int`` holding the
value scaled by ``SCALE`` (18 fractional digits). Division rounds toward
negative infinity unless a helper says otherwise.
"""

from __future__ import annotations

from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Union

SCALE = 10**18
DECIMALS = 18
ULP = 1

Number = Union[int, str, Decimal, Fraction, float]


def fp(value: Number) -> int:
    """Convert a human-readable number to fixed point.

    Strings and Decimals are parsed exactly and must not carry more than 18
    fractional digits. Floats go through ``repr`` so ``fp(0.1) == fp("0.1")``.
    """
    if isinstance(value, bool):
        raise TypeError("bool is not an amount")
    if isinstance(value, int):
        return value * SCALE
    if isinstance(value, float):
        value = repr(value)
    if isinstance(value, Fraction):
        scaled = value * SCALE
        if scaled.denominator != 1:
            raise ValueError(f"{value} is not representable with {DECIMALS} decimals")
        return int(scaled)
    with localcontext() as ctx:
        ctx.prec = 80
        d = Decimal(value)
        scaled = d * SCALE
        if scaled != scaled.to_integral_value():
            raise ValueError(f"{value} has more than {DECIMALS} fractional digits")
        return int(scaled)


def fp_float(value: float) -> int:
    """Quantize an arbitrary float (e.g. a simulated price) to fixed point, rounding down."""
    with localcontext() as ctx:
        ctx.prec = 80
        return int((Decimal(value) * SCALE).to_integral_value(rounding="ROUND_FLOOR"))


def to_decimal(x: int) -> Decimal:
    with localcontext() as ctx:
        ctx.prec = 80
        return Decimal(x) / SCALE


def to_fraction(x: int) -> Fraction:
    return Fraction(x, SCALE)


def to_float(x: int) -> float:
    return x / SCALE


def fmt(x: int) -> str:
    """Canonical decimal string: no exponent, trailing zeros stripped."""
    sign = "-" if x < 0 else ""
    whole, frac = divmod(abs(x), SCALE)
    if frac == 0:
        return f"{sign}{whole}"
    return f"{sign}{whole}.{frac:018d}".rstrip("0")


def parse(s: str) -> int:
    return fp(s)


def mul(a: int, b: int) -> int:
    """a*b rounded down."""
    return (a * b) // SCALE


def mul_up(a: int, b: int) -> int:
    return -((-a * b) // SCALE)


def div(a: int, b: int) -> int:
    """a/b rounded down."""
    if b == 0:
        raise ZeroDivisionError("fixed-point division by zero")
    return (a * SCALE) // b


def div_up(a: int, b: int) -> int:
    if b == 0:
        raise ZeroDivisionError("fixed-point division by zero")
    return -((-a * SCALE) // b)


def mul_div(a: int, b: int, c: int) -> int:
    """floor(a*b/c) on raw integers (no rescaling)."""
    return (a * b) // c


def bps(amount: int, basis_points: int) -> int:
    """Fee of ``basis_points`` on ``amount``, rounded down."""
    return (amount * basis_points) // 10_000


def bps_up(amount: int, basis_points: int) -> int:
    return -((-amount * basis_points) // 10_000)


def floor_to(x: int, grid: int) -> int:
    return (x // grid) * grid


def ceil_to(x: int, grid: int) -> int:
    return -((-x) // grid) * grid


def on_grid(x: int, grid: int) -> bool:
    return x % grid == 0
