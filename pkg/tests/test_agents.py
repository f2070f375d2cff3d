import pytest

from pegsim.agents import ArbParams, LocalMaker, MarketMaker, MMParams, NoiseTrader, Scripted, agent_rng, assess, mm_quote
from pegsim.agents.base import Cancel, Observation, Submit
from pegsim.errors import StaleIndex
from pegsim.fixed import SCALE, fp
from pegsim.margin import LONG, SHORT, IndexQuote, Position, Side

IDX = IndexQuote("USD/EXM", fp(100), 5)


def test_mm_quote_flat():
    quotes = mm_quote(IDX, 0, MMParams(half_spread=fp("0.005")))
    assert [(q.side, q.price) for q in quotes] == [(Side.BUY, fp("99.5")), (Side.SELL, fp("100.5"))]


def test_mm_quote_inventory_limits():
    p = MMParams(inventory_cap=fp(10))
    assert [q.side for q in mm_quote(IDX, fp(10), p)] == [Side.SELL]
    assert [q.side for q in mm_quote(IDX, -fp(10), p)] == [Side.BUY]
    skewed = mm_quote(IDX, fp(5), p)
    flat = mm_quote(IDX, 0, p)
    assert skewed[0].price < flat[0].price and skewed[1].price < flat[1].price


def test_mm_quote_stale():
    with pytest.raises(StaleIndex):
        mm_quote(IDX, 0, MMParams(staleness=1), now=7)


def test_mm_quote_capacity():
    quotes = mm_quote(IDX, 0, MMParams(size=fp(10)), capacity=fp(1200))
    assert sum(q.qty * q.price // SCALE for q in quotes) <= fp(1200)


def obs(**kw):
    base = dict(step=10, index=IDX, real_price=fp(100), mark=fp(100), best_bid=None, best_ask=None, rate=0,
                cb_rate=0, swap_period=16, tick=fp("0.01"), lot=fp("0.000001"), taker_fee_bps=10,
                free_exm=fp(10**5), position=None)
    base.update(kw)
    return Observation(**base)


def test_market_maker_stale_and_disabled():
    mm = MarketMaker("mm")
    fresh = IndexQuote("USD/EXM", fp(100), 10)
    acts = mm.decide(obs(index=fresh))
    assert isinstance(acts[0], Cancel) and sum(isinstance(a, Submit) for a in acts) == 2
    assert mm.decide(obs(step=20, index=fresh)) == []  # stale index: nothing to cancel, no quotes
    mm.disable()
    assert mm.decide(obs(index=fresh)) == [Cancel("mm")]
    assert mm.decide(obs(index=fresh)) == []


def test_assess_case1_needs_positive_edge():
    strict = ArbParams(min_edge=0.001, confidence=0.6, lam=0.0, sigma=0.02)
    assert not assess(strict, 100.0, 90.0, 0.0, LONG).go  # no reversion expected, r = 0
    assert assess(strict, 100.0, 90.0, 0.02, LONG).case == 1
    assert not assess(strict, 100.0, 110.0, 0.02, LONG).go


def test_assess_case2_needs_negative_rate():
    p = ArbParams(lam=0.0, sigma=0.02)
    assert assess(p, 100.0, 110.0, -0.02, SHORT).case == 2
    assert not assess(p, 100.0, 110.0, 0.0, SHORT).go


def test_miner_buys_below_real_price():
    from pegsim.agents import Miner

    m = Miner("m", ArbParams(lam=0.0))
    acts = m.decide(obs(best_ask=fp(90), rate=fp("0.02")))
    (buy,) = [a for a in acts if isinstance(a, Submit)]
    assert buy.side is Side.BUY and buy.price == fp("99.8")


def test_noise_trader_is_deterministic():
    a, b = NoiseTrader("n", agent_rng(3, 1)), NoiseTrader("n", agent_rng(3, 1))
    o = obs(best_bid=fp(99), best_ask=fp(101))
    assert [a.decide(o) for _ in range(20)] == [b.decide(o) for _ in range(20)]


def test_local_maker_ladder():
    acts = LocalMaker("lm").decide(obs())
    subs = [a for a in acts if isinstance(a, Submit)]
    assert len(subs) == 6
    assert max(s.price for s in subs if s.side is Side.BUY) < min(s.price for s in subs if s.side is Side.SELL)


def test_scripted_fires_on_its_step():
    s = Scripted("s", [{"step": 10, "op": "submit", "side": "buy", "price": "100", "qty": "1"}])
    assert len(s.decide(obs(step=9))) == 0
    assert len(s.decide(obs(step=10))) == 1
