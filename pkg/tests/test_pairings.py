from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from ncrough.domain.errors import AcceptanceError, BudgetError, UsageError
from ncrough.domain.pairings import (
    MomentQuery,
    Pairing,
    crossing_number,
    crossing_polynomial,
    density_moment,
    double_factorial,
    enumerate_pairings,
    moment_bound_check,
    q_gaussian_moment,
    q_joint_moment,
    support_edge,
)

CATALAN = [1, 1, 2, 5, 14, 42]


@pytest.mark.parametrize("r", [0, 2, 4, 6, 8, 10])
def test_enumeration_counts_double_factorial(r):
    pairings = enumerate_pairings(r)
    assert len(pairings) == double_factorial(r - 1)
    assert len(set(pairings)) == len(pairings)


def test_odd_size_has_no_pairing():
    assert enumerate_pairings(5) == []
    assert crossing_polynomial(5) == (0,)


def test_enumeration_budget():
    with pytest.raises(BudgetError):
        enumerate_pairings(22)


def test_invalid_pairing_rejected():
    with pytest.raises(UsageError):
        Pairing(((1, 2), (2, 3)))


def test_crossing_number_small_cases():
    assert crossing_number(Pairing(((1, 2), (3, 4)))) == 0
    assert crossing_number(Pairing(((1, 3), (2, 4)))) == 1
    assert crossing_number(Pairing(((1, 4), (2, 3)))) == 0
    assert crossing_number(Pairing(((1, 4), (2, 5), (3, 6)))) == 3


def test_crossing_number_invariant_under_reversal():
    for pairing in enumerate_pairings(8):
        assert crossing_number(pairing.reversed()) == crossing_number(pairing)


def test_crossing_polynomial_known_values():
    assert crossing_polynomial(4) == (2, 1)
    assert crossing_polynomial(6) == (5, 6, 3, 1)


@pytest.mark.parametrize("r", [2, 4, 6, 8, 10])
def test_crossing_polynomial_matches_enumeration(r):
    counts = [0] * len(crossing_polynomial(r))
    for pairing in enumerate_pairings(r):
        counts[crossing_number(pairing)] += 1
    assert tuple(counts) == crossing_polynomial(r)


@pytest.mark.parametrize("p", range(6))
def test_semicircle_moments_are_catalan(p):
    assert q_gaussian_moment(2 * p, 0) == CATALAN[p]


def test_fourth_moment_exact_rational():
    assert q_gaussian_moment(4, Fraction(1, 3)) == Fraction(7, 3)
    assert isinstance(q_gaussian_moment(4, Fraction(1, 3)), Fraction)


def test_joint_moment_with_times():
    # {12,34} -> 1·3, {13,24} -> q·1·2, {14,23} -> 1·2
    query = MomentQuery(q=Fraction(1, 2), times=(1, 2, 3, 4))
    assert q_joint_moment(query) == Fraction(6)


def test_joint_moment_odd_order_vanishes():
    assert q_joint_moment(MomentQuery(q=0.3, times=(1.0, 2.0, 3.0))) == 0.0


def test_joint_moment_with_gram_matches_times():
    times = (1, 2, 2, 3)
    gram = tuple(tuple(min(a, b) for b in times) for a in times)
    q = Fraction(-1, 4)
    assert q_joint_moment(MomentQuery(q=q, gram=gram)) == q_joint_moment(MomentQuery(q=q, times=times))


def test_moment_query_validation():
    with pytest.raises(UsageError):
        MomentQuery(q=1.0, times=(1.0, 1.0))
    with pytest.raises(UsageError):
        MomentQuery(q=0.0)
    with pytest.raises(UsageError):
        MomentQuery(q=0.0, gram=((1, 2), (0, 1)))


@given(
    r=st.sampled_from([0, 2, 4, 6, 8]),
    q=st.floats(min_value=-0.95, max_value=0.95, allow_nan=False, allow_infinity=False),
)
@settings(max_examples=60, deadline=None)
def test_fast_path_agrees_with_pairing_sum(r, q):
    brute = sum(q ** crossing_number(p) for p in enumerate_pairings(r))
    assert q_gaussian_moment(r, q) == pytest.approx(brute, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("q", [-0.5, 0.0, 0.5])
@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_density_moments_match_pairing_count(q, p):
    assert density_moment(q, 2 * p) == pytest.approx(float(q_gaussian_moment(2 * p, q)), abs=1e-8)


def test_density_odd_moment_is_zero():
    assert abs(density_moment(0.3, 3)) < 1e-10


def test_density_budget_and_range():
    with pytest.raises(BudgetError):
        density_moment(0.0, 14)
    with pytest.raises(UsageError):
        density_moment(1.0, 2)


def test_support_edge():
    assert support_edge(0.0) == pytest.approx(2.0)
    assert support_edge(0.75) == pytest.approx(4.0)


@pytest.mark.parametrize("n,p,q", [(1, 1, 0.0), (4, 2, 0.5), (16, 3, -0.5)])
def test_moment_bound_holds(n, p, q):
    value, bound = moment_bound_check(n, p, q)
    assert 0.0 <= value <= bound


def test_moment_bound_budget():
    with pytest.raises(BudgetError):
        moment_bound_check(128, 1, 0.0)


def test_acceptance_error_carries_row():
    err = AcceptanceError("x", row={"n": 1})
    assert err.exit_code == 3 and err.row == {"n": 1}
