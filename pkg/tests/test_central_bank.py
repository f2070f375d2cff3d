import pytest
from hypothesis import given, settings, strategies as st

from pegsim.central_bank import CentralBank, RatePolicy, accrue_and_pay, set_rate, solvency_check
from pegsim.errors import InsufficientFunds
from pegsim.fixed import SCALE, fp
from pegsim.ledger import EXM, FEE_SINK, Ledger


def test_set_rate_examples():
    assert set_rate([fp("0.01"), 0, fp("0.02")]) == fp("0.001")
    assert set_rate([-fp("0.01")] * 20, RatePolicy(margin_bps=0)) == fp("0.01")
    assert set_rate([]) == fp("0.001")


def _ledger(pool):
    led = Ledger()
    led.register("s")
    led.genesis("s", EXM, fp(1000))
    if pool:
        led.genesis(FEE_SINK, EXM, fp(pool))
    return led


def test_pay_from_pool_first():
    led = _ledger(10)
    pay = accrue_and_pay(led, [("s", fp(1000))], fp("0.001"))
    assert (pay.pool_used, pay.minted) == (fp(1), 0)
    assert led.free(FEE_SINK) == fp(9)


def test_pool_shortfall_is_minted():
    led = _ledger("0.25")
    pay = accrue_and_pay(led, [("s", fp(1000))], fp("0.001"))
    assert (pay.pool_used, pay.minted) == (fp("0.25"), fp("0.75"))
    assert led.minted_total[EXM] == fp("0.75")
    led.check_conservation()


def test_unlocked_deposit_earns_nothing():
    led = _ledger(10)
    cb = CentralBank(led, RatePolicy())
    cb.deposit("s", fp(1000), step=0, lock=False)
    assert cb.pay_interest(step=1).total == 0


def test_locked_stake_release_rules():
    led = _ledger(10)
    cb = CentralBank(led, RatePolicy(lock_period=30))
    cb.deposit("s", fp(500), step=0)
    with pytest.raises(InsufficientFunds):
        cb.release("s", step=10)
    assert cb.release("s", step=30) == fp(500)
    assert led.free("s") == fp(1000)


@pytest.mark.parametrize("interest,losses,headroom,violation", [(10, 7, 3, False), (5, 7, -2, True), (0, 0, 0, False)])
def test_solvency_examples(interest, losses, headroom, violation):
    rep = solvency_check([fp(interest)], [fp(losses)])
    assert rep.headroom == fp(headroom) and rep.violation is violation


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(1, 10**24), min_size=1, max_size=8), st.integers(0, 10**15), st.integers(0, 10**22))
def test_minted_is_accrual_minus_pool(stakes, rate, pool):
    led = Ledger()
    for i in range(len(stakes)):
        led.register(f"s{i}")
    if pool:
        led.genesis(FEE_SINK, EXM, pool)
    pay = accrue_and_pay(led, [(f"s{i}", a) for i, a in enumerate(stakes)], rate)
    assert pay.minted == max(0, pay.total - pool)
    assert pay.pool_used == min(pay.total, pool)
    led.check_conservation()


def test_stationary_history_keeps_headroom_non_negative():
    import numpy as np

    rng = np.random.default_rng(7)
    policy = RatePolicy(margin_bps=10, horizon=100)
    history, interest, losses = [], [], []
    stake = 1000 * SCALE
    for _ in range(2000):
        R_E = set_rate(history, policy)
        r = int(rng.normal(0.0, 0.002) * SCALE)
        interest.append(stake * R_E // SCALE)
        losses.append(stake * max(0, -r) // SCALE)
        history.append(r)
    assert solvency_check(interest, losses).headroom >= 0
