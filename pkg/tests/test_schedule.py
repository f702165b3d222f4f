import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from arru.schedule import (ScheduleKind, ThresholdState, advance, freeze_times, k_n, rho_bar,
                           update_times)


def brute_k(q, n):
    qf, k = Fraction(q), 0
    while qf ** (k + 1) <= n:
        k += 1
    return k


@pytest.mark.parametrize("q,n,expected", [
    (1.25, 10, [1, 2, 3, 4, 5, 7, 9]),
    (2.0, 8, [2, 4, 8]),
    (10.0, 5, []),
])
def test_update_times(q, n, expected):
    assert update_times(q, n) == expected


@pytest.mark.parametrize("q,n,k", [(1.25, 200, 23), (2.0, 8, 3), (2.0, 7, 2)])
def test_k_n(q, n, k):
    assert k_n(q, n) == k


@given(st.floats(1.01, 4.0), st.integers(1, 5000))
def test_k_n_matches_bruteforce(q, n):
    assert k_n(q, n) == brute_k(q, n)


def test_q_must_exceed_one():
    with pytest.raises(ValueError):
        update_times(1.0, 10)
    with pytest.raises(ValueError):
        k_n(0.9, 10)


def test_freeze_times_start_at_one():
    assert freeze_times(2.0, 8) == [1, 2, 4, 8]
    assert freeze_times(1.25, 10) == update_times(1.25, 10)
    assert freeze_times(10.0, 5) == [1]
    assert freeze_times(2.0, 0) == []


def test_advance_exponential_q2():
    ts = ThresholdState.start(ScheduleKind.EXPONENTIAL, 2.0, 0.6, 0.4, 20)
    for n in range(1, 4):
        ts = advance(ts, n, (0.6, 0.4))
    ts = advance(ts, 4, (0.7, 0.4))
    assert ts.active == (0.7, 0.4)
    ts = advance(ts, 5, (0.8, 0.5))
    assert ts.active == (0.7, 0.4)
    assert (ts.rho1_hat, ts.rho2_hat) == (0.8, 0.5)


def test_every_step_follows_live():
    ts = ThresholdState.start(ScheduleKind.EVERY_STEP, 1.25, 0.6, 0.4, 10)
    for n, live in enumerate([(0.7, 0.3), (0.65, 0.35), (0.9, 0.2)], start=1):
        ts = advance(ts, n, live)
        assert ts.active == live


def test_rho_bar_examples():
    ts = ThresholdState.start(ScheduleKind.EVERY_STEP, 1.25, 0.5, 0.5, 10)
    assert rho_bar(ts) is None
    ts = advance(ts, 1, (0.7, 0.5))
    ts = advance(ts, 2, (0.7, 0.5))
    assert rho_bar(ts) == pytest.approx(0.6)
    const = ThresholdState.start(ScheduleKind.EXPONENTIAL, 1.25, 0.6, 0.6, 50)
    for n in range(1, 51):
        const = advance(const, n, (0.6, 0.6))
        assert rho_bar(const) == pytest.approx(0.6, abs=1e-15)


def test_advance_rejects_skipped_step():
    ts = ThresholdState.start(ScheduleKind.EXPONENTIAL, 1.25, 0.6, 0.4, 10)
    with pytest.raises(ValueError):
        advance(ts, 2, (0.6, 0.4))


lives = st.lists(st.tuples(st.floats(0.5, 0.99), st.floats(0.01, 0.5)), min_size=1, max_size=120)


@given(st.floats(1.05, 3.0), lives)
def test_piecewise_constant_and_k_n_agreement(q, seq):
    h = len(seq)
    ts = ThresholdState.start(ScheduleKind.EXPONENTIAL, q, 0.6, 0.4, h)
    times = set(freeze_times(q, h))
    tilde = [ts.active]
    for n, live in enumerate(seq, start=1):
        prev = ts.active
        ts = advance(ts, n, live)
        if n not in times:
            assert ts.active == prev
        tilde.append(ts.active)
        assert ts.rho1_tilde >= ts.rho2_tilde
        # frozen value equals the live value captured at floor(q ** k_n)
        # primary form: value captured at the last floor(q**i) <= n, i >= 0
        last = max(t for t in times if t <= n)
        assert ts.active == seq[last - 1]
        # log form agrees except one step early at n = floor(q**j) < q**j
        t = math.floor(Fraction(q) ** k_n(q, n))
        if not (n in times and t != n):
            assert ts.active == seq[t - 1]


@given(lives)
def test_rho_bar_telescopes(seq):
    ts = ThresholdState.start(ScheduleKind.EXPONENTIAL, 1.25, 0.6, 0.4, len(seq))
    prev = 0.0
    for n, live in enumerate(seq, start=1):
        active = ts.rho1_tilde
        ts = advance(ts, n, live)
        total = n * rho_bar(ts)
        assert total - prev == pytest.approx(active, abs=1e-12)
        prev = total
