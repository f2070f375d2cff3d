import pytest
from hypothesis import given, settings, strategies as st

from conftest import PAIR, make_exchange
from pegsim.errors import BadTick, InsufficientMargin, NotOwner, UnknownOrder
from pegsim.exchange import pro_rata
from pegsim.fixed import SCALE, fp
from pegsim.ledger import EXM, FEE_SINK
from pegsim.margin import Side


def test_submit_examples(market):
    ledger, _, ex = market
    ledger.register("carol")
    ledger.genesis("carol", EXM, fp("100.1"))
    ex.submit("carol", Side.BUY, fp(100), fp(1))
    with pytest.raises(InsufficientMargin):
        ex.submit("alice", Side.BUY, fp(100), fp(20))
    with pytest.raises(BadTick):
        ex.submit("alice", Side.BUY, fp("100.003"), fp(1))


def test_capacity_is_notional_over_leverage():
    _, _, ex = make_exchange(max_leverage=2, taker=0, maker=0, accounts=[("a", 100)])
    ex.submit("a", Side.BUY, fp(100), fp(2), leverage=2 * SCALE)
    with pytest.raises(InsufficientMargin):
        ex.submit("a", Side.BUY, fp(100), fp(1), leverage=2 * SCALE)


def test_pro_rata_fixture():
    _, margin, ex = make_exchange(taker=0, maker=0, lot="0.000000000000000001",
                                  accounts=[("m1", 10**5), ("m2", 10**5), ("m3", 10**5), ("t", 10**5)])
    ids = [ex.submit(m, Side.SELL, fp(100), fp(q)) for m, q in (("m1", 100), ("m2", 200), ("m3", 700))]
    ex.run_batch()
    ex.submit("t", Side.BUY, fp(100), fp(500))
    trades = ex.run_batch()
    filled = {t.seller: t.qty for t in trades}
    assert filled == {"m1": fp(50), "m2": fp(100), "m3": fp(350)}
    assert all(t.price == fp(100) for t in trades)
    assert [ex.orders[i].remaining for i in ids] == [fp(50), fp(100), fp(350)]
    assert margin.open_interest(PAIR) == (fp(500), fp(500))


def test_equal_split_exact_at_ulp_lot():
    fills = pro_rata([(1, fp(3)), (2, fp(3))], fp(5), 1)
    assert fills == {1: fp("2.5"), 2: fp("2.5")}


def test_fee_split():
    ledger, _, ex = make_exchange(accounts=[("maker", 2000), ("taker", 2000)])
    ex.submit("maker", Side.SELL, fp(100), fp(10))
    ex.run_batch()
    sink0 = ledger.free(FEE_SINK)
    ex.submit("taker", Side.BUY, fp(100), fp(10))
    (t,) = ex.run_batch()
    assert t.notional == fp(1000)
    assert t.buy_fee == fp(1) and t.sell_fee == -fp("0.8")
    assert ledger.free(FEE_SINK) - sink0 == fp("0.2")


def test_cancel_examples(market):
    _, _, ex = market
    oid = ex.submit("alice", Side.BUY, fp(99), fp(1))
    with pytest.raises(NotOwner):
        ex.cancel(oid, owner="bob")
    ex.cancel(oid, owner="alice")
    assert oid not in ex.orders
    with pytest.raises(UnknownOrder):
        ex.cancel(oid)


def test_cancel_releases_hold(market):
    ledger, _, ex = market
    before = ledger.free("alice")
    oid = ex.submit("alice", Side.BUY, fp(99), fp(1))
    assert ledger.free("alice") < before
    ex.cancel(oid)
    assert ledger.free("alice") == before


def test_empty_batch():
    _, _, ex = make_exchange()
    assert ex.run_batch() == []


def test_midpoint_of_tied_range():
    _, _, ex = make_exchange(taker=0, maker=0, accounts=[("b", 1000), ("s", 1000)])
    ex.submit("b", Side.BUY, fp("101.05"), fp(1))
    ex.submit("s", Side.SELL, fp(99), fp(1))
    (t,) = ex.run_batch()
    assert t.price == fp("100.02")


orders = st.lists(st.tuples(st.sampled_from([Side.BUY, Side.SELL]), st.integers(95, 105), st.integers(1, 40)),
                  min_size=1, max_size=25)


@settings(max_examples=150, deadline=None)
@given(orders)
def test_batch_properties(book):
    accounts = [(f"u{i}", 10**6) for i in range(len(book))]
    ledger, _, ex = make_exchange(lot="1", accounts=accounts)
    for i, (side, px, q) in enumerate(book):
        ex.submit(f"u{i}", side, fp(px), fp(q))
    placed = {o.id: o for o in ex.orders.values()}
    sink0 = ledger.free(FEE_SINK)
    trades = ex.run_batch()
    if not trades:
        return
    price = trades[0].price
    assert all(t.price == price for t in trades)
    buys = [o for o in placed.values() if o.side is Side.BUY and o.price >= price]
    sells = [o for o in placed.values() if o.side is Side.SELL and o.price <= price]
    assert max(o.price for o in sells) <= price <= min(o.price for o in buys)
    volume = sum(t.qty for t in trades)
    assert volume == min(sum(o.qty for o in buys), sum(o.qty for o in sells))
    fees = sum(t.buy_fee + t.sell_fee for t in trades)
    assert ledger.free(FEE_SINK) - sink0 == fees >= 0
    # price priority across levels, pro-rata (within one lot) at the marginal level
    for side_orders, key in ((buys, "buy_order"), (sells, "sell_order")):
        got = {}
        for t in trades:
            got[getattr(t, key)] = got.get(getattr(t, key), 0) + t.qty
        prices = sorted({o.price for o in side_orders}, reverse=(key == "buy_order"))
        left = volume
        for px in prices:
            level = [o for o in side_orders if o.price == px]
            total = sum(o.qty for o in level)
            if total <= left:
                assert all(got.get(o.id, 0) == o.qty for o in level)
                left -= total
                continue
            for o in level:
                assert abs(got.get(o.id, 0) * total - left * o.qty) <= fp(1) * total
            assert sum(got.get(o.id, 0) for o in level) == left
            left = 0
        assert left == 0
    bid, ask = ex.best_bid(), ex.best_ask()
    assert bid is None or ask is None or bid < ask
    ledger.check_conservation()
