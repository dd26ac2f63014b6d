#!/usr/bin/env python3
"""Closed-form rate analysis"""
import math

import pytest

from slidingfountain.analysis import (
    asymptotic_rate_bound,
    feasibility_threshold,
    full_rank_excess,
    max_effective_rate,
    rate_curve,
    required_received_symbols,
)
from slidingfountain.channel import expanded_loss_prob


def test_full_rank_excess():
    assert full_rank_excess(0.5) == pytest.approx(1.0)
    assert full_rank_excess(0.01) == pytest.approx(6.644, abs=1e-3)
    assert full_rank_excess(1.0) == 0.0
    for bad in (0.0, 1.5, -0.1):
        with pytest.raises(ValueError):
            full_rank_excess(bad)
    assert required_received_symbols(100, 0.01) == 107


def test_asymptotic_rate_bound():
    assert asymptotic_rate_bound(0.0, 100, 0.5) == pytest.approx(100 / 101)
    for p in (0.1, 0.3, 0.5):
        value = asymptotic_rate_bound(p, 10**6, 0.01)
        assert value < 1 - p
        assert abs(value - (1 - p)) / (1 - p) < 1e-3
    with pytest.raises(ValueError):
        asymptotic_rate_bound(1.0, 10, 0.5)


def test_max_effective_rate_examples():
    zero = max_effective_rate(0.0)
    assert zero.r_max == 1.0
    assert zero.feasible
    assert max_effective_rate(0.1).r_max == pytest.approx(0.888, abs=1e-3)
    assert max_effective_rate(0.30).feasible
    assert not max_effective_rate(0.31).feasible
    assert max_effective_rate(0.35).r_max is None
    with pytest.raises(ValueError):
        max_effective_rate(1.0)


def test_threshold():
    threshold = feasibility_threshold()
    assert threshold == pytest.approx(1 - math.exp(-1 / math.e))
    assert threshold == pytest.approx(0.3078, abs=1e-4)
    assert max_effective_rate(threshold - 1e-3).feasible
    assert not max_effective_rate(threshold + 1e-3).feasible
    assert max_effective_rate(0.2).threshold_used == threshold


def test_threshold_matches_the_feasibility_boundary():
    lo, hi = 0.25, 0.35
    assert max_effective_rate(lo).feasible
    assert not max_effective_rate(hi).feasible
    while hi - lo > 1e-7:
        mid = 0.5 * (lo + hi)
        if max_effective_rate(mid).feasible:
            lo = mid
        else:
            hi = mid
    assert lo == pytest.approx(feasibility_threshold(), abs=1e-4)


def test_r_max_monotone_and_self_consistent():
    ps = [0.01 * i for i in range(1, 31)]
    rates = [max_effective_rate(p).r_max for p in ps]
    assert all(r is not None for r in rates)
    assert rates == sorted(rates, reverse=True)
    for p, r in zip(ps, rates):
        assert r < 1 - expanded_loss_prob(p, r) + 1e-6


def test_rate_curve_two_curves():
    ps = [0.01 * i for i in range(1, 30)]
    for p, plain, expanded in rate_curve(ps):
        assert plain == 1 - p
        assert expanded is not None
        assert expanded < plain
    assert rate_curve([0.4]) == [(0.4, pytest.approx(0.6), None)]
