from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from math import comb

import pytest

from momentlab import sequences
from momentlab.hankel import Verdict, check_pm
from momentlab.measures import CatalanArc, Poisson, divided_moment, moment_sequence
from momentlab.numerics import Polynomial
from momentlab.sequences import (
    BetaRatio,
    Catalan,
    FibAveraged,
    FibEven,
    FibShift,
    InversePowers,
    Powers,
    RisingFactorial,
    Touchard,
    bell_numbers,
    binet_weights,
    catalan,
    double_factorial_odd,
    family_sequence,
    fibonacci,
    stirling2,
    touchard,
)
from momentlab.tests import PM_FAMILIES


def test_catalan():
    assert [catalan(n) for n in range(10)] == [1, 1, 2, 5, 14, 42, 132, 429, 1430, 4862]


def test_bell_and_stirling():
    assert bell_numbers(7) == [1, 1, 2, 5, 15, 52, 203]
    assert stirling2(4, 2) == 7
    assert stirling2(5, 5) == 1
    assert stirling2(5, 0) == 0
    with pytest.raises(ValueError):
        stirling2(2, 3)


def test_touchard():
    assert touchard(3, 1) == 5
    assert touchard(2, 2) == 6
    assert touchard(0, Fraction(1, 3)) == 1


def test_fibonacci():
    assert fibonacci(10) == 55
    assert fibonacci(0) == 0


def test_double_factorial():
    assert [double_factorial_odd(k) for k in range(5)] == [1, 1, 3, 15, 105]


def test_binet_weights():
    roots, weights = binet_weights(0, dps=50)
    for n in (1, 2, 10):
        value = weights[0] * roots[0] ** n + weights[1] * roots[1] ** n
        assert abs(value - fibonacci(n)) < Fraction(1, 10**40)

    _, shifted = binet_weights(1, dps=50)
    assert all(w > 0 for w in shifted)


def test_fib_shift():
    assert FibShift(1).terms(5) == [1, 1, 2, 3, 5]
    assert FibShift(3).terms(3) == [2, 3, 5]
    with pytest.raises(ValueError):
        FibShift(2)


def test_fib_averaged_offset():
    spec = FibAveraged("odd-fib-minus-one")
    seq = family_sequence(spec, 3)
    assert list(seq) == [Fraction(1, 2), Fraction(4, 3), 3]
    assert seq.provenance["offset"] == 1

    assert family_sequence(FibAveraged(), 3).provenance.get("offset") is None
    with pytest.raises(ValueError):
        FibAveraged("no-such-kind")


def test_family_parameters_validated():
    with pytest.raises(ValueError):
        InversePowers(-1)
    with pytest.raises(ValueError):
        RisingFactorial(-1)
    with pytest.raises(ValueError):
        BetaRatio(1, 0)
    with pytest.raises(ValueError):
        Touchard(-1)


def test_family_sequence_provenance():
    seq = family_sequence(Powers(2), 4)
    assert list(seq) == [1, 2, 4, 8]
    assert seq.provenance == {"family": {"variant": "powers", "params": {"a": ["2", "1"]}}}

    with pytest.raises(ValueError):
        family_sequence(Catalan(), 0)


@pytest.mark.parametrize("spec, nonneg_support", PM_FAMILIES)
def test_family_is_pm(spec, nonneg_support):
    report = check_pm(family_sequence(spec, 15))
    assert report.verdict is Verdict.PM_CONSISTENT
    assert report.first_negative_index is None


def test_even_fibonacci_is_not_pm():
    report = check_pm(family_sequence(FibEven(), 5))
    assert report.dets[1] == -1
    assert report.verdict is Verdict.NOT_PM
    assert report.first_negative_index == 1


def test_odd_fibonacci_minus_one_average_is_not_pm():
    report = check_pm(family_sequence(FibAveraged("odd-fib-minus-one"), 5))
    assert report.dets[1] == Fraction(-5, 18)
    assert report.verdict is Verdict.NOT_PM


def test_fibonacci_partial_sum_average_is_not_pm():
    # (F_(n+2) - 1)/(n+1) starts with 0 but is not identically 0
    seq = family_sequence(FibAveraged("partial-sum-average"), 5)
    assert list(seq)[:3] == [0, Fraction(1, 2), Fraction(2, 3)]

    report = check_pm(seq)
    assert report.dets[:2] == (0, Fraction(-1, 4))
    assert report.verdict is Verdict.NOT_PM


def test_bell_recurrence():
    bell = bell_numbers(17)
    for n in range(16):
        assert bell[n + 1] == sum(comb(n, k) * bell[k] for k in range(n + 1))
        assert touchard(n, 1) == bell[n]


def test_fibonacci_partial_sums():
    for n in range(21):
        assert sum(fibonacci(j) for j in range(n + 1)) == fibonacci(n + 2) - 1


def test_catalan_family_matches_arc_moments():
    values = family_sequence(Catalan(), 20)
    assert list(values) == list(moment_sequence(CatalanArc(), 20))

    one = Polynomial((1,))
    for k in range(8):
        integral = divided_moment(CatalanArc(), one, k, dps=40)
        assert abs(integral - values[k]) < Fraction(1, 10**25), k


@pytest.mark.parametrize("lam", [0, Fraction(1, 2), 1, 3])
def test_touchard_family_matches_poisson_moments(lam):
    values = list(family_sequence(Touchard(lam), 16))
    assert values == list(moment_sequence(Poisson(lam), 16))
    # Poisson moments satisfy m_(n+1) = lam sum_k C(n, k) m_k
    for n in range(15):
        assert values[n + 1] == lam * sum(comb(n, k) * values[k] for k in range(n + 1))


def test_stirling_rows_concurrent(monkeypatch):
    monkeypatch.setattr(sequences, "_STIRLING_ROWS", [(1,)])
    sizes = [60, 5, 45, 30, 60, 12, 50, 25] * 4

    with ThreadPoolExecutor(max_workers=8) as executor:
        values = list(executor.map(lambda n: touchard(n, 1), sizes))

    assert values == [bell_numbers(n + 1)[n] for n in sizes]
    assert [len(row) for row in sequences._STIRLING_ROWS] == list(range(1, 62))
