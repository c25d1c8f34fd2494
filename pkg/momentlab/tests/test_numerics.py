import os
import random
import threading
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from itertools import permutations

import pytest
from mpmath import mp

from momentlab.numerics import (
    MomentSequence,
    Polynomial,
    Real,
    count_real_roots,
    determinant,
    elementary_symmetric,
    format_scalar,
    parse_scalar,
    poly_derivative,
    poly_divmod,
    poly_eval,
    poly_from_roots,
    scalar_from_json,
    scalar_to_json,
    solve_linear,
    sturm_sequence,
)
from momentlab.sequences import FamilySpec, Powers
from momentlab.utils import DEFAULT_PRECISION, PRECISION_ENV_VAR, get_precision, precision_scope


def test_parse_scalar_exact():
    assert parse_scalar("3") == Fraction(3)
    assert parse_scalar("-2/6") == Fraction(-1, 3)
    assert parse_scalar("0.25") == Fraction(1, 4)


def test_parse_scalar_real():
    x = parse_scalar("0.1", dps=30, exact_decimals=False)
    assert isinstance(x, Real)
    assert x.dps == 30


def test_parse_scalar_garbage():
    with pytest.raises(ValueError):
        parse_scalar("one half")


def test_real_promotion():
    x = Real(1, 30) + Fraction(1, 2)
    assert isinstance(x, Real)
    assert x.dps == 30
    assert x == Fraction(3, 2)

    y = Real(1, 30) * Real(2, 50)
    assert y.dps == 50


def test_real_rejects_division_by_zero():
    with pytest.raises(ZeroDivisionError):
        Real(1, 20) / 0


def test_scalar_json():
    assert scalar_to_json(Fraction(1, 3)) == ["1", "3"]
    assert scalar_from_json(["1", "3"]) == Fraction(1, 3)
    assert scalar_from_json(7) == Fraction(7)
    assert isinstance(scalar_from_json("0.5", 20), Real)


def test_format_scalar():
    assert format_scalar(Fraction(4, 2)) == "2"
    assert format_scalar(Fraction(-1, 3)) == "-1/3"
    assert format_scalar(Real(Fraction(1, 3), 30), 5) == "0.33333"


def test_precision_from_environment(monkeypatch):
    monkeypatch.delenv(PRECISION_ENV_VAR, raising=False)
    assert get_precision() == DEFAULT_PRECISION

    monkeypatch.setenv(PRECISION_ENV_VAR, "35")
    assert get_precision() == 35
    assert get_precision(80) == 80

    with pytest.raises(ValueError):
        get_precision(5)


def test_precision_scope_restores(monkeypatch):
    monkeypatch.delenv(PRECISION_ENV_VAR, raising=False)
    with precision_scope(40):
        assert get_precision() == 40
    assert get_precision() == DEFAULT_PRECISION

    monkeypatch.setenv(PRECISION_ENV_VAR, "35")
    with precision_scope(90):
        assert get_precision() == 90
    assert get_precision() == 35


def test_precision_scope_is_context_local(monkeypatch):
    monkeypatch.delenv(PRECISION_ENV_VAR, raising=False)
    barrier = threading.Barrier(2)

    def worker(dps):
        with precision_scope(dps):
            # both threads hold their scope at the same time
            barrier.wait(timeout=10)
            seen = get_precision()
            barrier.wait(timeout=10)
        return seen

    with ThreadPoolExecutor(max_workers=2) as executor:
        assert list(executor.map(worker, [30, 90])) == [30, 90]

    with precision_scope(40):
        with precision_scope(70):
            assert get_precision() == 70
        assert get_precision() == 40
        assert PRECISION_ENV_VAR not in os.environ
    assert get_precision() == DEFAULT_PRECISION


def test_polynomial_trims_and_parses():
    p = Polynomial.parse("1,0,1,0")
    assert p.coeffs == (1, 0, 1)
    assert p.degree == 2
    assert poly_eval(p, 2) == 5
    assert str(p) == "1,0,1"


def test_poly_from_roots():
    assert poly_from_roots([1, 2]).coeffs == (2, -3, 1)
    assert poly_from_roots([Fraction(1, 2)]).coeffs == (Fraction(-1, 2), 1)


def test_polynomial_helpers():
    assert elementary_symmetric([1, 2, 3], 2) == 11
    assert poly_derivative(Polynomial((0, 2, 0, 1))).coeffs == (2, 0, 3)

    quotient, remainder = poly_divmod(Polynomial((-1, 0, 0, 1)), Polynomial((-1, 1)))
    assert quotient.coeffs == (1, 1, 1)
    assert not remainder
    with pytest.raises(ZeroDivisionError):
        poly_divmod(Polynomial((1,)), Polynomial(()))

    chain = sturm_sequence(Polynomial((-1, 0, 1)))
    assert [q.coeffs for q in chain] == [(-1, 0, 1), (0, 2), (1,)]


def test_count_real_roots():
    p = Polynomial((-1, 0, 1))
    assert count_real_roots(p, -2, 2) == 2
    assert count_real_roots(p, 0, 2) == 1
    assert count_real_roots(p, 1, 2) == 1
    assert count_real_roots(Polynomial((1, 0, 1)), -10, 10) == 0


def test_determinant_exact():
    assert determinant([[2, 1], [1, 2]]) == 3
    assert determinant([[0, 1], [1, 0]]) == -1
    assert determinant([[1, 2], [2, 4]]) == 0
    assert determinant([[Fraction(1, 2)]]) == Fraction(1, 2)


def _cofactor_det(matrix):
    if len(matrix) == 1:
        return matrix[0][0]
    return sum(
        (-1) ** j * matrix[0][j] * _cofactor_det([row[:j] + row[j + 1 :] for row in matrix[1:]])
        for j in range(len(matrix))
    )


@pytest.mark.parametrize("seed", range(30))
def test_determinant_matches_cofactor_expansion(seed):
    rng = random.Random(seed)
    n = rng.randint(1, 5)
    matrix = [[rng.randint(-9, 9) for _ in range(n)] for _ in range(n)]
    assert determinant(matrix) == _cofactor_det(matrix)


@pytest.mark.parametrize("seed", range(10))
def test_poly_from_roots_vanishes_at_roots(seed):
    rng = random.Random(seed)
    roots = [Fraction(rng.randint(-20, 20), rng.randint(1, 6)) for _ in range(rng.randint(1, 5))]
    p = poly_from_roots(roots)
    assert p.degree == len(roots)
    assert p.leading == 1
    assert all(poly_eval(p, r) == 0 for r in roots)


def test_elementary_symmetric_permutation_invariant():
    values = [Fraction(1, 2), -3, 5, Fraction(7, 3)]
    for k in range(len(values) + 1):
        expected = elementary_symmetric(values, k)
        assert all(elementary_symmetric(list(p), k) == expected for p in permutations(values))
    assert elementary_symmetric(values, 0) == 1


def test_determinant_real():
    det = determinant([[Real(2, 40), 1], [1, 2]])
    assert isinstance(det, Real)
    assert abs(det - 3) < Fraction(1, 10**35)


def test_determinant_not_square():
    with pytest.raises(ValueError):
        determinant([[1, 2]])


def test_solve_linear():
    assert solve_linear([[1, 1], [1, -1]], [3, 1]) == [2, 1]

    x = solve_linear([[Real(1, 40), 1], [1, -1]], [3, 1])
    assert abs(x[0] - 2) < Fraction(1, 10**35)

    with pytest.raises(ValueError):
        solve_linear([[1, 1], [1, 1]], [1, 2])


def test_moment_sequence_kind():
    exact = MomentSequence((1, Fraction(1, 2)))
    assert exact.kind == "exact"
    assert exact.precision is None

    mixed = MomentSequence((1, Real(Fraction(1, 2), 25)))
    assert mixed.kind == "real"
    assert mixed.precision == 25
    assert all(isinstance(x, Real) for x in mixed)


def test_moment_sequence_json():
    seq = MomentSequence((1, Fraction(1, 2)), {"family": "test"})
    data = seq.to_json()
    assert data == {
        "kind": "exact",
        "values": [["1", "1"], ["1", "2"]],
        "provenance": {"family": "test"},
    }
    assert MomentSequence.from_json(data) == seq

    real = MomentSequence((Real(Fraction(1, 3), 30),))
    restored = MomentSequence.from_json(real.to_json())
    assert restored.precision == 30
    with mp.workdps(30):
        assert abs(restored[0].value - mp.mpf(1) / 3) < mp.mpf(10) ** -29


def test_tagged_spec_json():
    spec = Powers(Fraction(1, 2))
    assert spec.to_json() == {"variant": "powers", "params": {"a": ["1", "2"]}}
    assert FamilySpec.from_json(spec.to_json()) == spec

    with pytest.raises(ValueError):
        FamilySpec.from_json({"variant": "no-such-family"})
