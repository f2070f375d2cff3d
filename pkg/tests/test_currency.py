import pytest
from hypothesis import given, settings, strategies as st

from conftest import PAIR, make_exchange
from pegsim.currency import CurrencyService
from pegsim.errors import InsufficientTokens, NoLiquidity
from pegsim.fixed import SCALE, fp
from pegsim.ledger import CURRENCY_SERVICE, EXM, RESERVE, USDE
from pegsim.margin import Side


def setup(fee_bps=0, lot="0.000001"):
    ledger, margin, ex = make_exchange(taker=0, maker=0, lot=lot,
                                       accounts=[("user", 10**4), ("mm", 10**7), (RESERVE, 10**6)])
    cs = CurrencyService(ledger, ex, fee_bps=fee_bps)
    return ledger, margin, ex, cs


def quote(ex, side, price, qty=10):
    ex.cancel_all("mm")
    ex.submit("mm", side, fp(price), fp(qty))
    ex.run_batch()


def test_issue_fully_backed():
    ledger, margin, ex, cs = setup()
    quote(ex, Side.SELL, 100)
    cs.issue("user", fp(100))
    ex.run_batch()
    assert ledger.free("user", USDE) == fp(1)
    pos = margin.position(CURRENCY_SERVICE, PAIR)
    assert pos.qty == fp(1) and pos.margin == pos.cost == fp(100)
    cs.check_backing()


def test_issue_with_fee():
    ledger, _, ex, cs = setup(fee_bps=10)
    quote(ex, Side.SELL, "99.9")
    cs.issue("user", fp(100))
    ex.run_batch()
    assert ledger.free("user", USDE) == fp(1)
    assert ledger.free("user") == fp(10**4) - fp(100)


def test_issue_without_asks():
    _, _, _, cs = setup()
    with pytest.raises(NoLiquidity):
        cs.issue("user", fp(100))


@pytest.mark.parametrize("exit_price", [120, 80])
def test_redeem_at_market(exit_price):
    ledger, _, ex, cs = setup()
    quote(ex, Side.SELL, 100)
    cs.issue("user", fp(100))
    ex.run_batch()
    quote(ex, Side.BUY, exit_price)
    before = ledger.free("user")
    cs.redeem("user", fp(1))
    ex.run_batch()
    assert ledger.free("user") - before == fp(exit_price)
    assert ledger.total_supply(USDE) == 0
    with pytest.raises(InsufficientTokens):
        cs.redeem("user", fp(2))


def test_delayed_requests():
    ledger, _, ex, cs = setup()
    quote(ex, Side.SELL, 100)
    yes = cs.issue("user", fp(100), limit_price=fp(101), deadline_step=5)
    no = cs.issue("user", fp(100), limit_price=fp(99), deadline_step=5)
    assert cs.process_delayed(1) == [yes]
    ex.run_batch()
    assert cs.requests[yes].status == "done"
    assert cs.requests[no].status == "queued"
    assert cs.process_delayed(6) == []
    assert cs.requests[no].status == "expired"
    assert ledger.free("user") == fp(10**4) - fp(100)
    assert cs.escrow == 0


def test_unfilled_issue_is_refunded():
    ledger, _, ex, cs = setup(fee_bps=10)
    quote(ex, Side.SELL, 100, qty=1)
    cs.issue("user", fp(300))
    ex.run_batch()
    assert ledger.free("user", USDE) == fp(1)
    # the 0.3 fee is kept only in proportion to the 100 of the 299.7 budget that was used
    fee, budget = fp("0.3"), fp("299.7")
    kept = fee - fee * (budget - fp(100)) // budget
    assert fp(10**4) - ledger.free("user") == fp(100) + kept
    assert cs.requests[1].fee == kept


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 10**4), st.integers(1, 500))
def test_round_trip_at_constant_price(x_lots, price):
    ledger, _, ex, cs = setup(lot="0.01")
    x = x_lots * SCALE // 100
    ledger.genesis("user", EXM, x * price)
    quote(ex, Side.SELL, price, qty=200)
    start = ledger.free("user")
    cs.issue("user", x * price)
    ex.run_batch()
    assert ledger.free("user", USDE) == x
    quote(ex, Side.BUY, price, qty=200)
    cs.redeem("user", x)
    ex.run_batch()
    assert ledger.free("user") == start
    cs.check_backing()
    ledger.check_conservation()
