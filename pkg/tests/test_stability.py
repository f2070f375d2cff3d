from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from pegsim.agents.stability import (
    SpreadModel, case1_flow, case1_profit, case1_profitable, case1_threshold, case2_flow, case2_profit,
    case2_profitable, case2_threshold, execute_case1, execute_case2, participant_fraction, spread, unwind_case1,
)
from pegsim.errors import InsufficientCapital, WrongRegime

P = SpreadModel.discrete({-0.2: 0.3, 0.0: 0.5, 0.05: 0.2})


@pytest.mark.parametrize("a,b,d", [(100, 90, F(-1, 10)), (100, 100, 0), (100, 110, F(1, 10))])
def test_spread(a, b, d):
    assert spread(a, b) == d


def test_case1_examples():
    assert case1_profitable(F(-1, 10), 0, 0)
    assert sum(case1_flow(100, 90, 100, 100, 0)[1:]) == 1
    assert not case1_profitable(F(-1, 10), F(-1, 10), 0, F(1, 100))
    assert case1_threshold(F(-1, 10), F(9, 1000), F(1, 100)) == F(-1, 10)
    # a collapse to d_t = -1 is still beaten by a large enough swap rate
    assert case1_profitable(F(-1, 10), -1, F(9, 10) + F(9, 1000) + F(1, 10**6), F(1, 100))
    with pytest.raises(WrongRegime):
        case1_threshold(0, 0)


def test_participant_fraction_examples():
    assert participant_fraction(P, 0.0, -0.1) == pytest.approx(0.7, abs=1e-12)
    assert participant_fraction(P, 0.15, -0.1) == pytest.approx(1.0, abs=1e-12)
    at_q = SpreadModel.point(-0.1)
    assert participant_fraction(at_q, 0.0, -0.1) == 0.0


def test_case2_examples():
    out, inflow = case2_flow(100, 110, 100, 100, 0)
    assert (out, inflow) == (110, 120)
    assert case2_profitable(F(1, 10), 0, 0)
    assert case2_threshold(F(1, 10), F(1, 10), F(1, 10)) == F(1, 10)
    with pytest.raises(WrongRegime):
        case2_threshold(0, 0)


def test_case1_plan_and_capital():
    plan = execute_case1(1, 1, 100, 90)
    assert plan.flow_out == F(9, 10)
    assert [a.kind for a in plan.entry] == ["sell", "to_virtual", "long"]
    assert plan.entry[1].amount == 90
    assert unwind_case1(plan, 100, 100, 0).flow_in == 1
    with pytest.raises(InsufficientCapital):
        execute_case1(F(1, 2), 1, 100, 90)


def test_case2_plan_capital():
    plan = execute_case2(staked_exm=200, capital_exm=110, qty=1, a0=100, b0=110)
    assert plan.flow_out == 110
    with pytest.raises(InsufficientCapital):
        execute_case2(staked_exm=50, capital_exm=200, qty=1, a0=100, b0=110)


prices = st.integers(50, 200).map(F)
small = st.integers(-100, 100).map(lambda x: F(x, 1000))


@given(prices, prices, prices, st.integers(1, 99).map(lambda x: F(x, 100)), small, st.integers(0, 20).map(lambda x: F(x, 1000)))
def test_case1_profit_sign_matches_condition(a0, at, bt, frac, r, R_D):
    b0 = a0 * frac  # d0 < 0
    d0, dt = (b0 - a0) / a0, (bt - at) / at
    profit = case1_profit(a0, b0, at, bt, r, R_D)
    assert (profit > 0) == case1_profitable(d0, dt, r, R_D)


@given(prices, prices, prices, st.integers(101, 150).map(lambda x: F(x, 100)), st.integers(-100, 0).map(lambda x: F(x, 1000)),
       st.integers(0, 20).map(lambda x: F(x, 1000)))
def test_case2_profit_sign_matches_condition(a0, at, bt, mult, r, R_E):
    b0 = a0 * mult
    d0, dt = (b0 - a0) / a0, (bt - at) / at
    profit = case2_profit(a0, b0, at, bt, r, R_E)
    assert (profit > 0) == case2_profitable(d0, dt, r, R_E)


@settings(max_examples=100)
@given(st.dictionaries(st.integers(-100, 100).map(lambda x: x / 100), st.integers(1, 10), min_size=1, max_size=10))
def test_fraction_monotone_and_saturates(raw):
    total = sum(raw.values())
    model = SpreadModel.discrete({k: v / total for k, v in raw.items()})
    grid = [i / 100 for i in range(-50, 300)]
    vals = [participant_fraction(model, r, -0.1) for r in grid]
    assert all(x <= y for x, y in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(1.0)


def test_gaussian_model_is_normalised():
    m = SpreadModel.gaussian(-0.05, 0.02)
    assert sum(m.masses) == pytest.approx(1.0)
    assert m.mean() == pytest.approx(-0.05, abs=1e-3)
    assert SpreadModel.mean_reverting(-0.1, 0.0, 0.02) is SpreadModel.mean_reverting(-0.1, 0.0, 0.02)
