from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nanogrid_p2p.trading import (
    IDLE,
    OrderBook,
    Role,
    TradeRole,
    clear_market,
    role_conventional,
    role_proposed,
    settle,
)

kw = st.floats(0, 30, allow_nan=False)


def test_conventional_examples():
    assert role_conventional(12, 2, 9) == TradeRole(Role.BUY, 1.0)
    assert role_conventional(2, 5, 9) == TradeRole(Role.SELL, 3.0)
    assert role_conventional(11, 2, 9) == IDLE


def test_conventional_negative_amount_collapses():
    # net below the limit but load above PV: nothing to sell
    assert role_conventional(5, 2, 9) == IDLE


def test_proposed_examples():
    assert role_proposed((8, 6), [(14, 2)] * 3, 9) == TradeRole(Role.BUY, 2.0)
    assert role_proposed((1, 0), [(0, 5)] * 3, 9) == IDLE
    with pytest.raises(ValueError):
        role_proposed((1, 1), [(1, 1)] * 2, 9)


def test_proposed_averaged_amount():
    assert role_proposed((8, 6), [(14, 2)] * 3, 9, average_horizon_amount=True).amount_kw == pytest.approx(0.5)


def test_clearing_examples():
    a = clear_market(OrderBook(offers=[(0, 4.0), (1, 2.0)], requests=[(2, 3.0)]))
    assert a.traded_kw == pytest.approx({0: -2.0, 1: -1.0, 2: 3.0})
    a = clear_market(OrderBook(offers=[(0, 2.0)], requests=[(2, 3.0), (3, 3.0)]))
    assert a.traded_kw == pytest.approx({0: -2.0, 2: 1.0, 3: 1.0})
    a = clear_market(OrderBook(offers=[], requests=[(2, 5.0)]))
    assert a.traded_kw == {2: 0.0} and a.total_traded_kw == 0


def test_book_validation():
    with pytest.raises(ValueError):
        OrderBook(offers=[(0, 1.0)], requests=[(0, 1.0)])
    with pytest.raises(ValueError):
        OrderBook(offers=[(0, 0.0)])


def test_settle_examples():
    assert settle(6, 0.10) == pytest.approx(0.10)
    assert settle(0, 0.10) == 0
    assert settle(-3, 0.08) == pytest.approx(-0.04)


@given(kw, kw, st.floats(0.5, 20))
def test_constant_forecast_reduces_to_conventional(load, pv, pw_max):
    assert role_proposed((load, pv), [(load, pv)] * 3, pw_max).role == role_conventional(load, pv, pw_max).role


@given(st.lists(st.floats(0.01, 20), max_size=6), st.lists(st.floats(0.01, 20), max_size=6))
def test_clearing_conserves(offers, requests):
    book = OrderBook(list(enumerate(offers)), [(10 + i, q) for i, q in enumerate(requests)])
    a = clear_market(book)
    T = min(math.fsum(offers), math.fsum(requests))
    delivered = -math.fsum(v for c, v in a.traded_kw.items() if c < 10)
    received = math.fsum(v for c, v in a.traded_kw.items() if c >= 10)
    assert delivered == pytest.approx(T, abs=1e-9)
    assert received == pytest.approx(T, abs=1e-9)
    for c, q in book.offers:
        assert -a.traded_kw[c] <= q + 1e-12
    for c, q in book.requests:
        assert a.traded_kw[c] <= q + 1e-12
    assert abs(math.fsum(settle(v, 0.1) for v in a.traded_kw.values())) <= 1e-9


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(0, 1))
def test_settle_linear_antisymmetric(a, b, smp):
    assert settle(a + b, smp) == pytest.approx(settle(a, smp) + settle(b, smp), abs=1e-12)
    assert settle(-a, smp) == -settle(a, smp)


def test_capped_role():
    assert TradeRole.sell(5.0).capped(2.0) == TradeRole(Role.SELL, 2.0)
    assert TradeRole.buy(5.0).capped(0.0) == IDLE
    assert IDLE.capped(3.0) == IDLE
