import pytest

from pegsim.exchange import Exchange, PairConfig
from pegsim.fixed import SCALE, fp
from pegsim.ledger import EXM, FEE_SINK, RESERVE, Ledger
from pegsim.margin import MarginEngine, MarginParams

PAIR = "USD/EXM"


def make_exchange(max_leverage=1, tick="0.01", lot="0.000001", taker=10, maker=8, accounts=()):
    ledger = Ledger()
    margin = MarginEngine(ledger, {PAIR: MarginParams(max_leverage=max_leverage * SCALE)})
    ex = Exchange(ledger, margin, [PairConfig(tick=fp(tick), lot=fp(lot), taker_fee_bps=taker, maker_rebate_bps=maker)])
    for acct, amount in accounts:
        ledger.register(acct)
        ledger.genesis(acct, EXM, fp(amount))
    return ledger, margin, ex


@pytest.fixture
def market():
    return make_exchange(accounts=[("alice", 1000), ("bob", 1000), (RESERVE, 10**6), (FEE_SINK, 100)])
