from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from conftest import PAIR, make_exchange
from pegsim.fixed import SCALE, fp
from pegsim.ledger import FEE_SINK, RESERVE
from pegsim.margin import LONG, SHORT, Position, Side
from pegsim.swap import DeviationSample, FundingParams, FundingState, execute_swap, measure, swap_transfers, update_rate


@pytest.mark.parametrize("trades,expected", [
    ([(99, 10)], "-0.01"),
    ([(101, 10), (99, 10)], "0"),
    ([(90, 30), (100, 10)], "-0.075"),
])
def test_measure_examples(trades, expected):
    sample = measure([(fp(p), fp(q), 0) for p, q in trades], {0: fp(100)})
    assert sample.vwdev == fp(expected)


def test_update_rate_examples():
    st0 = FundingState(PAIR)
    assert update_rate(st0, DeviationSample(fp("-0.05"), 1)).rate == fp("0.005")
    capped = FundingState(PAIR, FundingParams(r_max=fp("0.01")), rate=fp("0.0099"))
    assert update_rate(capped, DeviationSample(fp("-0.05"), 1)).rate == fp("0.01")
    same = FundingState(PAIR, rate=fp("0.003"))
    assert update_rate(same, DeviationSample(0, 0)).rate == fp("0.003")


def _pos(owner, side, qty, margin=1000):
    return Position(owner, PAIR, side, fp(qty), fp(qty) * 100, fp(margin))


def test_swap_examples():
    tr, short, rem = swap_transfers([_pos("L", LONG, 1), _pos("S", SHORT, 1)], fp(100), fp("0.01"))
    assert {t.owner: t.amount for t in tr} == {"L": fp(1), "S": -fp(1)}
    assert (short, rem) == (0, 0)
    assert swap_transfers([_pos("L", LONG, 1), _pos("S", SHORT, 1)], fp(100), 0) == ([], 0, 0)
    tr, _, _ = swap_transfers([_pos("L", LONG, 2), _pos("S", SHORT, 2)], fp(150), fp("-0.02"))
    assert {t.owner: t.amount for t in tr} == {"L": -fp(6), "S": fp(6)}


def test_payer_capped_shortfall_from_reserve():
    tr, shortfall, rem = swap_transfers([_pos("L", LONG, 1), _pos("S", SHORT, 1, margin=1)], fp(100), fp("0.05"))
    assert {t.owner: t.amount for t in tr} == {"L": fp(5), "S": -fp(1)}
    assert shortfall == fp(4) and rem == 0


def test_execute_swap_moves_margin_inside_clearing():
    ledger, margin, ex = make_exchange(taker=0, maker=0, accounts=[("L", 1000), ("S", 1000), (RESERVE, 1000)])
    ex.submit("L", Side.BUY, fp(100), fp(1))
    ex.submit("S", Side.SELL, fp(100), fp(1))
    ex.run_batch()
    execute_swap(margin, PAIR, fp(100), fp("0.01"))
    assert margin.position("L", PAIR).margin == fp(101)
    assert margin.position("S", PAIR).margin == fp(99)
    margin.check_invariants()


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(1, 10**6), min_size=1, max_size=6), st.lists(st.integers(1, 10**6), min_size=1, max_size=6),
       st.integers(-5 * 10**16, 5 * 10**16), st.integers(1, 10**4), st.lists(st.integers(0, 10**9), min_size=12, max_size=12))
def test_swap_zero_sum(longs, shorts, rate, price, margins):
    # scale one side so open interest matches exactly
    lq = [q * sum(shorts) for q in longs]
    sq = [q * sum(longs) for q in shorts]
    pos = [Position(f"l{i}", PAIR, LONG, q * 10**6, 0, margins[i] * 10**12) for i, q in enumerate(lq)]
    pos += [Position(f"s{i}", PAIR, SHORT, q * 10**6, 0, margins[6 + i] * 10**12) for i, q in enumerate(sq)]
    tr, shortfall, rem = swap_transfers(pos, price * SCALE, rate)
    assert sum(t.amount for t in tr) + rem - shortfall == 0
    assert shortfall >= 0 and rem >= 0
    by = {p.owner: p for p in pos}
    assert all(-t.amount <= by[t.owner].margin for t in tr if t.amount < 0)


@given(st.integers(-10**17, 10**17), st.integers(-10**17, 10**17), st.integers(-5 * 10**16, 5 * 10**16))
def test_controller_monotone_and_bounded(v1, v2, r0):
    lo, hi = sorted((v1, v2))
    s = FundingState(PAIR, rate=r0)
    r_lo = update_rate(s, DeviationSample(lo, 1)).rate
    r_hi = update_rate(s, DeviationSample(hi, 1)).rate
    assert r_lo >= r_hi
    p = s.params
    assert p.r_min <= r_lo <= p.r_max and p.r_min <= r_hi <= p.r_max
