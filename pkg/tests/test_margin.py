import pytest
from hypothesis import given, settings, strategies as st

from conftest import PAIR, make_exchange
from pegsim.errors import LeverageExceeded, StaleIndex
from pegsim.fixed import SCALE, fp
from pegsim.ledger import EXM, RESERVE, Ledger
from pegsim.margin import LONG, SHORT, IndexQuote, MarginEngine, MarginParams, Position, Side, equity


def engine(max_leverage=2):
    led = Ledger()
    led.register("t")
    led.genesis("t", EXM, fp(1000))
    led.genesis(RESERVE, EXM, fp(1000))
    return led, MarginEngine(led, {PAIR: MarginParams(max_leverage=max_leverage * SCALE)})


def test_open_examples():
    led, m = engine(max_leverage=1)
    m.open_or_update("t", PAIR, Side.BUY, fp(1), fp(100), fp(100))
    assert m.position("t", PAIR).margin == fp(100) and led.free("t") == fp(900)
    led2, m2 = engine(max_leverage=2)
    m2.open_or_update("t", PAIR, Side.SELL, fp(1), fp(100), fp(50))
    assert m2.position("t", PAIR).side is SHORT
    _, m3 = engine(max_leverage=2)
    with pytest.raises(LeverageExceeded):
        m3.open_or_update("t", PAIR, Side.BUY, fp(1), fp(100), fp(40))


@pytest.mark.parametrize("side,margin,mark,expected", [
    (SHORT, 50, 150, 0),
    (SHORT, 100, 200, 0),
    (LONG, 100, 0, 0),
    (LONG, 100, 120, 120),
])
def test_equity_examples(side, margin, mark, expected):
    pos = Position("t", PAIR, side, fp(1), fp(100), fp(margin))
    assert equity(pos, fp(mark)) == fp(expected)


def _short_book(margin_2x=True):
    ledger, margin, ex = make_exchange(max_leverage=2, taker=0, maker=0,
                                       accounts=[("long", 1000), ("short", 1000), (RESERVE, 10**6)])
    ex.submit("long", Side.BUY, fp(100), fp(1), leverage=SCALE)
    ex.submit("short", Side.SELL, fp(100), fp(1), leverage=(2 if margin_2x else 1) * SCALE)
    ex.run_batch()
    return ledger, margin, ex


def test_liquidation_when_equity_hits_zero():
    _, margin, ex = _short_book()
    assert margin.run_margin_calls(IndexQuote(PAIR, fp("149.99"), 1), step=1) == []
    (liq,) = margin.run_margin_calls(IndexQuote(PAIR, fp(150), 2), step=2)
    assert liq.owner == "short" and liq.bankruptcy_price == fp(150)
    order = ex.orders[liq.order_id]
    assert order.reduce_only and order.side is Side.BUY


def test_fully_backed_long_never_liquidated():
    _, margin, _ = _short_book()
    for px in ("0.000000000001", "1", "99", "1000000"):
        liqs = margin.run_margin_calls(IndexQuote(PAIR, fp(px), 3), step=3)
        assert all(l.owner != "long" for l in liqs)


def test_stale_index():
    _, margin, ex = _short_book()
    with pytest.raises(StaleIndex):
        margin.run_margin_calls(IndexQuote(PAIR, fp(150), 0), step=5)
    assert not any(o.liquidation for o in ex.orders.values())


def test_liquidation_shortfall_from_reserve():
    ledger, margin, ex = _short_book()
    ledger.register("mm")
    ledger.genesis("mm", EXM, fp(10**4))
    margin.run_margin_calls(IndexQuote(PAIR, fp(160), 1), step=1)
    ex.submit("mm", Side.SELL, fp(165), fp(1))
    reserve0 = ledger.free(RESERVE)
    (t,) = ex.run_batch()
    assert t.price == fp("166.5")  # midpoint of the 168 liquidation limit and the 165 ask
    assert margin.position("short", PAIR) is None
    assert reserve0 - ledger.free(RESERVE) == t.price - fp(150)
    margin.check_invariants()
    ledger.check_conservation()


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([Side.BUY, Side.SELL]), st.integers(90, 110), st.integers(1, 5)),
                min_size=2, max_size=30),
       st.integers(50, 200))
def test_zero_sum_and_clearing_identity(trades, mark):
    names = ["p0", "p1", "p2", "p3"]
    ledger, margin, ex = make_exchange(max_leverage=1, taker=0, maker=0, lot="1",
                                       accounts=[(n, 10**6) for n in names])
    for i, (side, px, q) in enumerate(trades):
        owner = names[i % 4]
        pos = margin.position(owner, PAIR)
        closing = pos is not None and pos.side is not side
        try:
            ex.submit(owner, side, fp(px), fp(q), reduce_only=closing and pos.qty >= fp(q))
        except Exception:
            continue
        ex.run_batch()
        margin.check_invariants()
        assert margin.zero_sum(PAIR, fp(mark)) == 0
    ledger.check_conservation()
