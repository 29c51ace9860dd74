from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prethermal.arithmetic import (
    CLUSTER_CONSTANT_ALT,
    Counterexample,
    DyadicLabel,
    FactorialLabel,
    Holds,
    IntVecLabel,
    Penalty,
    Poly,
    Quasipoly,
    StretchExpt,
    check_subadditivity,
    default_oracle_grid,
    diophantine_margin,
    dyadic_depth,
    dyadic_pairs_random,
    factorial_depth,
    factorial_pairs_random,
    intvec_pairs_exhaustive,
    intvec_pairs_random,
    label_from_string,
    make_class,
    penalty_value,
    small_divisor_h,
    small_divisor_sup_oracle,
    ultra_subadditivity_violations,
)
from prethermal.errors import DomainError, ParameterError


@pytest.mark.parametrize("mu, d", [(Fraction(1, 2), 1), (Fraction(2, 4), 1), (Fraction(3, 8), 3), (Fraction(5), 0)])
def test_dyadic_depth(mu, d):
    assert dyadic_depth(mu) == d


def test_dyadic_depth_rejects_non_dyadic():
    with pytest.raises(DomainError):
        dyadic_depth(Fraction(1, 3))


@pytest.mark.parametrize("mu, k", [(Fraction(7), 1), (Fraction(1, 2), 2), (Fraction(1, 6), 3), (Fraction(5, 24), 4)])
def test_factorial_depth(mu, k):
    assert factorial_depth(mu) == k


def test_labels_reduce_and_close():
    assert DyadicLabel(2, 2) == DyadicLabel(1, 1)
    assert DyadicLabel(1, 1) + DyadicLabel(1, 1) == DyadicLabel(1, 0)
    assert FactorialLabel(3, 3).k == 2
    s = FactorialLabel(1, 2) + FactorialLabel(1, 3)
    assert isinstance(s, FactorialLabel) and s.value() == Fraction(2, 3)
    assert IntVecLabel((1, -2)) + IntVecLabel((0, 2)) == IntVecLabel((1, 0))


def test_label_omega():
    assert IntVecLabel((1, 2)).omega((1.0, 0.5)) == pytest.approx(2.0)
    assert DyadicLabel(1, 2).omega(1.0) == pytest.approx(2 * math.pi / 4)
    assert FactorialLabel(1, 3).omega(2.0) == pytest.approx(2 * math.pi * 2.0 / 6)


@pytest.mark.parametrize("label", [IntVecLabel((3, -1)), DyadicLabel(5, 4), FactorialLabel(7, 5)])
def test_label_string_round_trip(label):
    assert label_from_string(str(label)) == label


def test_penalty_examples():
    assert penalty_value(Penalty("Factorial_BLogFact", 2.0), FactorialLabel(1, 3)) == pytest.approx(2 * math.log(6))
    assert penalty_value(Penalty("Dyadic_Linear"), DyadicLabel(4, 0)) == 0.0
    # (ln(e/2 + 1))**2 evaluated by hand: ln(2.35914) = 0.85830.
    assert penalty_value(Penalty("QF_LogPowB", 2.0), IntVecLabel((1,))) == pytest.approx(0.73668, abs=1e-5)


def test_penalty_zero_label_and_mismatch():
    for fam, label in [("QF_Log", IntVecLabel((0,))), ("Dyadic_Square", DyadicLabel(0, 3)), ("Factorial_FactPowB", FactorialLabel(0, 1))]:
        p = Penalty(fam, 1.0) if fam.endswith("PowB") else Penalty(fam)
        assert p.value(label) == 0.0
    with pytest.raises(DomainError):
        penalty_value(Penalty("QF_Log"), DyadicLabel(1, 1))


def test_norm_alpha_counterexample():
    result = check_subadditivity(Penalty("QF_NormAlpha", 2.0), [(IntVecLabel((1,)), IntVecLabel((1,)))], 1)
    assert isinstance(result, Counterexample)
    assert (result.lhs, result.rhs) == (4.0, 2.0)
    assert result.csv_row("QF_NormAlpha").startswith("QF_NormAlpha,n(1),n(1),")


def test_qf_log_exhaustive():
    result = check_subadditivity(Penalty("QF_Log"), intvec_pairs_exhaustive(100), 10**6)
    assert isinstance(result, Holds) and result.trials == 201**2


@pytest.mark.parametrize("alpha", [0.3, 0.7, 1.0])
def test_norm_alpha_holds_for_small_alpha(alpha):
    assert isinstance(check_subadditivity(Penalty("QF_NormAlpha", alpha), intvec_pairs_random(1, dim=2), 20_000), Holds)


@pytest.mark.parametrize("family", ["Dyadic_Linear", "Dyadic_Square"])
def test_dyadic_penalties_hold(family):
    assert isinstance(check_subadditivity(Penalty(family), dyadic_pairs_random(0), 20_000), Holds)


@pytest.mark.parametrize("family, b", [("Factorial_BLogFact", 2.0), ("Factorial_LogFactPowB", 2.0), ("Factorial_FactPowB", 0.5)])
def test_factorial_penalties_hold(family, b):
    assert isinstance(check_subadditivity(Penalty(family, b), factorial_pairs_random(0), 20_000), Holds)


def test_ultra_subadditivity_exhaustive():
    assert ultra_subadditivity_violations("dyadic", 8) == 0
    assert ultra_subadditivity_violations("factorial", 6) == 0


@settings(max_examples=300, deadline=None)
@given(st.integers(-(10**6), 10**6), st.integers(0, 40), st.integers(-(10**6), 10**6), st.integers(0, 40))
def test_dyadic_ultra_subadditive_property(k1, d1, k2, d2):
    a, b = DyadicLabel(k1, d1), DyadicLabel(k2, d2)
    assert dyadic_depth((a + b).value()) <= max(dyadic_depth(a.value()), dyadic_depth(b.value()))


@settings(max_examples=300, deadline=None)
@given(st.integers(-(10**6), 10**6), st.integers(1, 15), st.integers(-(10**6), 10**6), st.integers(1, 15))
def test_factorial_ultra_subadditive_property(n1, k1, n2, k2):
    a, b = FactorialLabel(n1, k1), FactorialLabel(n2, k2)
    assert factorial_depth((a + b).value()) <= max(factorial_depth(a.value()), factorial_depth(b.value()))


def test_class_min_gaps_and_names():
    assert Poly(3).min_gap == pytest.approx(1 / 3)
    assert Quasipoly(2).min_gap == 0 and StretchExpt(1).min_gap == 0
    assert make_class("quasipoly", 2.0) == Quasipoly(2.0)
    x = np.array([0.01, 0.1])
    np.testing.assert_allclose(Quasipoly(2).f(x), np.exp(-Quasipoly(2).p(x)))


def test_small_divisor_examples():
    assert small_divisor_h(Poly(3), 1 / 3) == 1.0
    assert math.isinf(small_divisor_h(Poly(3), 0.2))
    assert small_divisor_h(Quasipoly(2), 1.0) == pytest.approx(math.exp(0.25))
    assert small_divisor_h(StretchExpt(1), 0.5) == pytest.approx(2 / math.e)
    with pytest.raises(ParameterError):
        small_divisor_h(Poly(2), 0.0)


def test_small_divisor_oracle_examples():
    grid = default_oracle_grid(1e-4, 10.0)
    assert small_divisor_sup_oracle(StretchExpt(1), 0.5, grid) == pytest.approx(2 / math.e, rel=0.05)
    assert small_divisor_sup_oracle(Quasipoly(2), 1.0, default_oracle_grid()) == pytest.approx(math.exp(0.25), rel=0.05)
    assert small_divisor_sup_oracle(Poly(2), 0.5, default_oracle_grid()) <= 1.0 + 1e-9


@pytest.mark.parametrize("cls", [Quasipoly(2.0), Quasipoly(3.0), StretchExpt(1.0), StretchExpt(2.0)])
def test_small_divisor_matches_oracle(cls):
    grid = default_oracle_grid()
    for d in np.linspace(0.05, 1.0, 8):
        assert small_divisor_h(cls, d) == pytest.approx(small_divisor_sup_oracle(cls, d, grid), rel=0.05)


def test_poly_oracle_grows_below_gap():
    coarse = small_divisor_sup_oracle(Poly(2), 0.3, default_oracle_grid(1e-6, 1e3, 200))
    fine = small_divisor_sup_oracle(Poly(2), 0.3, default_oracle_grid(1e-12, 1e3, 200))
    assert fine > 100 * coarse


def test_diophantine_examples():
    assert diophantine_margin((1.0,), 1.0, 10) == pytest.approx(1.0)
    assert diophantine_margin((1.0, 2.0), 1.0, 2) == pytest.approx(0.0)
    phi = (math.sqrt(5) - 1) / 2
    m10 = diophantine_margin((1.0, phi), 1.0, 10)
    m50 = diophantine_margin((1.0, phi), 1.0, 50)
    assert 0 < m50 <= m10


def test_cluster_constant():
    assert CLUSTER_CONSTANT_ALT == pytest.approx(0.634, abs=1e-3)
