import random
from fractions import Fraction
from itertools import permutations
from math import prod

import pytest

from momentlab import hankel, measures
from momentlab.hankel import Verdict
from momentlab.measures import FiniteAtomic
from momentlab.numerics import MomentSequence, Real
from momentlab.sequences import Catalan, Factorial, GaussianAbs, Powers, family_sequence
from momentlab.tests import MEASURES, PM_FAMILIES
from momentlab.utils import InsufficientLengthError


def _leibniz_det(matrix):
    n = len(matrix)
    total = Fraction(0)
    for perm in permutations(range(n)):
        inversions = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        total += (-1) ** inversions * prod(matrix[i][perm[i]] for i in range(n))
    return total


def test_hankel_matrix():
    seq = MomentSequence((1, 2, 3, 4, 5))
    assert hankel.hankel_matrix(seq, 2) == [[1, 2, 3], [2, 3, 4], [3, 4, 5]]
    with pytest.raises(InsufficientLengthError):
        hankel.hankel_matrix(seq, 3)


def test_catalan_dets_are_one():
    dets = hankel.hankel_transform(family_sequence(Catalan(), 21))
    assert dets == [1] * 11


@pytest.mark.parametrize("spec", [Factorial(), GaussianAbs(), Powers(Fraction(3, 2))])
def test_transform_matches_leibniz(spec):
    seq = family_sequence(spec, 9)
    dets = hankel.hankel_transform(seq, 4)
    for n, det in enumerate(dets):
        assert det == _leibniz_det(hankel.hankel_matrix(seq, n))


def test_scaling_covariance():
    seq = family_sequence(Factorial(), 9)
    scaled = MomentSequence(tuple(3 * x for x in seq))
    for n, (det, scaled_det) in enumerate(
        zip(hankel.hankel_transform(seq), hankel.hankel_transform(scaled))
    ):
        assert scaled_det == 3 ** (n + 1) * det


def test_check_pm_catalan():
    report = hankel.check_pm(family_sequence(Catalan(), 11), max_order=5)
    assert report.verdict is Verdict.PM_CONSISTENT
    assert report.first_negative_index is None
    assert report.rank_drop_index is None
    assert report.zero_threshold == 0


def test_check_pm_negative_second_moment():
    report = hankel.check_pm(MomentSequence((1, 0, -1)))
    assert report.dets == (1, -1)
    assert report.verdict is Verdict.NOT_PM
    assert report.first_negative_index == 1


def test_check_pm_short_sequence():
    with pytest.raises(InsufficientLengthError):
        hankel.check_pm(MomentSequence((1, 2)), max_order=1)


def test_check_pm_borderline_is_inconclusive():
    seq = MomentSequence((Real(0, 40), Real(1, 40), Real(0, 40)))
    report = hankel.check_pm(seq)
    assert report.zero_threshold > 0
    assert report.verdict is Verdict.INCONCLUSIVE
    assert report.first_negative_index == 1


def test_check_pm_explicit_threshold():
    seq = MomentSequence((1, 1, Fraction(999, 1000)))
    assert hankel.check_pm(seq).verdict is Verdict.NOT_PM
    assert hankel.check_pm(seq, zero_threshold=Fraction(1, 100)).verdict is Verdict.PM_CONSISTENT


def test_default_zero_threshold_scales():
    seq = MomentSequence(tuple(Real(x, 40) for x in (1, 10, 100)))
    threshold = hankel.default_zero_threshold(seq)
    assert abs(threshold - Fraction(1, 10**16)) < Fraction(1, 10**50)


def test_report_json():
    data = hankel.check_pm(MomentSequence((1, 0, -1))).to_json()
    assert data == {
        "dets": [["1", "1"], ["-1", "1"]],
        "first_negative_index": 1,
        "rank_drop_index": None,
        "verdict": "not-pm",
        "zero_threshold": ["0", "1"],
        "max_order": 1,
    }


def test_rank_detect_two_atoms():
    seq = measures.moment_sequence(FiniteAtomic(((1, 1), (2, 1))), 9)
    assert hankel.rank_detect(seq) == 2


def test_rank_detect_one_atom():
    seq = measures.moment_sequence(FiniteAtomic(((Fraction(1, 3), 1),)), 7)
    assert hankel.rank_detect(seq) == 1


@pytest.mark.parametrize("seed", range(50))
def test_rank_detect_random_atoms(seed):
    rng = random.Random(seed)
    k = rng.choice((2, 3))
    locations = rng.sample(range(-20, 21), k)
    atoms = tuple((Fraction(x, 7), rng.randint(1, 9)) for x in locations)
    seq = measures.moment_sequence(FiniteAtomic(atoms), 2 * (k + 2) + 1)

    report = hankel.check_pm(seq)
    assert report.rank_drop_index == k
    assert all(det > 0 for det in report.dets[:k])
    assert all(det == 0 for det in report.dets[k:])
    assert report.verdict is Verdict.PM_CONSISTENT


@pytest.mark.parametrize("spec, nonneg_support", PM_FAMILIES)
def test_inequalities_hold_for_families(spec, nonneg_support):
    seq = family_sequence(spec, 21)
    assert hankel.moment_inequality_report(seq, nonneg_support) == []


@pytest.mark.parametrize("spec, nonneg_support", MEASURES)
def test_inequalities_hold_for_measures(spec, nonneg_support):
    seq = measures.moment_sequence(spec, 21)
    assert hankel.moment_inequality_report(seq, nonneg_support) == []


@pytest.mark.parametrize("spec, nonneg_support", MEASURES)
def test_check_pm_measures_to_order_8(spec, nonneg_support):
    report = hankel.check_pm(measures.moment_sequence(spec, 17), 8)
    assert report.verdict is Verdict.PM_CONSISTENT
    assert report.first_negative_index is None
    assert len(report.dets) == 9


def test_cauchy_schwarz_violation():
    violations = hankel.moment_inequality_report(MomentSequence((1, 3, 1)))
    assert [(v.name, v.indices) for v in violations] == [
        ("cauchy-schwarz", (1, 0)),
        ("cauchy-schwarz", (1, 1)),
    ]
    assert violations[0].lhs == 9
    assert violations[0].rhs == 1


def test_sign_violations():
    names = {v.name for v in hankel.moment_inequality_report(MomentSequence((1, 0, -1)))}
    assert "even-moment" in names

    names = {v.name for v in hankel.moment_inequality_report(MomentSequence((1, -1, 1)), True)}
    assert "nonnegative-moment" in names

    violations = hankel.moment_inequality_report(MomentSequence((0, 1)))
    assert [v.name for v in violations] == ["total-mass"]


def test_root_monotonicity_violation():
    seq = MomentSequence((1, 2, 1))
    names = {v.name for v in hankel.moment_inequality_report(seq, nonneg_support=True)}
    assert "root-monotonicity" in names
