import pytest
from hypothesis import given, settings, strategies as st

from pegsim.errors import InsufficientFunds, UnauthorizedMinter, UnknownAccount
from pegsim.fixed import fp
from pegsim.ledger import CENTRAL_BANK, CURRENCY_SERVICE, EXM, USDE, Ledger, replay_balances


@pytest.fixture
def led():
    ledger = Ledger()
    for a in ("A", "B"):
        ledger.register(a)
    ledger.genesis("A", EXM, fp(100))
    return ledger


def test_transfer_examples(led):
    led.transfer("A", "B", EXM, fp(40))
    assert (led.free("A"), led.free("B")) == (fp(60), fp(40))
    led.transfer("A", "B", EXM, fp(60))
    assert led.free("A") == 0
    with pytest.raises(InsufficientFunds):
        led.transfer("B", "A", EXM, fp(100) + 1)


def test_lock_unlock_examples(led):
    led.lock("A", EXM, fp(30))
    assert (led.free("A"), led.locked("A")) == (fp(70), fp(30))
    led.unlock("A", EXM, fp(30))
    assert (led.free("A"), led.locked("A")) == (fp(100), 0)
    led.transfer("A", "B", EXM, fp(90))
    with pytest.raises(InsufficientFunds):
        led.lock("A", EXM, fp(30))


def test_mint_burn_examples():
    led = Ledger()
    led.register("user")
    led.genesis(CENTRAL_BANK, EXM, fp(1000))
    led.mint(EXM, CENTRAL_BANK, fp(1), CENTRAL_BANK)
    assert led.total_supply(EXM) == fp(1001)
    assert led.minted_total[EXM] == fp(1)
    led.mint(USDE, "user", fp(1), CURRENCY_SERVICE)
    led.burn(USDE, "user", fp(1), CURRENCY_SERVICE)
    assert led.total_supply(USDE) == 0
    with pytest.raises(UnauthorizedMinter):
        led.mint(EXM, "user", fp(1), "user")
    led.check_conservation()


def test_unknown_account(led):
    with pytest.raises(UnknownAccount):
        led.transfer("A", "nobody", EXM, 1)


def test_journal_replays_to_balances(led):
    led.transfer("A", "B", EXM, fp(7))
    led.lock("B", EXM, fp(2))
    replayed = replay_balances(led.drain_journal())
    assert replayed[("A", EXM, "free")] == fp(93)
    assert replayed[("B", EXM, "free")] == fp(5)
    assert replayed[("B", EXM, "locked")] == fp(2)


ops = st.lists(st.tuples(st.sampled_from(["transfer", "lock", "unlock", "mint", "burn", "tlocked"]),
                         st.sampled_from(["A", "B", "C"]), st.sampled_from(["A", "B", "C"]),
                         st.integers(0, 150 * 10**18)), max_size=60)


@settings(max_examples=200, deadline=None)
@given(ops)
def test_conservation_and_no_negatives(seq):
    led = Ledger()
    for a in "ABC":
        led.register(a)
        led.genesis(a, EXM, fp(100))
    for op, src, dst, amt in seq:
        try:
            if op == "transfer":
                led.transfer(src, dst, EXM, amt)
            elif op == "tlocked":
                led.transfer_locked(src, dst, EXM, amt)
            elif op == "lock":
                led.lock(src, EXM, amt)
            elif op == "unlock":
                led.unlock(src, EXM, amt)
            elif op == "mint":
                led.mint(EXM, src, amt, CENTRAL_BANK)
            else:
                led.burn(EXM, src, amt, CENTRAL_BANK)
        except (InsufficientFunds, ValueError):
            pass
        for a in "ABC":
            b = led.balance(a, EXM)
            assert b.free >= 0 and b.locked >= 0
    total = sum(led.balance(a, EXM).total for a in led.accounts)
    assert total == led.initial_supply[EXM] + led.minted_total[EXM] - led.burned_total[EXM]
    led.check_conservation()
