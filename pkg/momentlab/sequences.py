"""Exact generators for the combinatorial positive moment sequence families.

Every family yields exact rationals when its parameters are exact. The Fibonacci-derived
families are built from integer recurrences; Stirling and Bell numbers come from their triangles.
"""

import logging
import threading
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial
from typing import ClassVar, NamedTuple

from mpmath import mp

from momentlab.numerics import MomentSequence, Real, TaggedSpec, as_scalar
from momentlab.utils import get_precision

log = logging.getLogger(__name__)

_STIRLING_ROWS = [(1,)]
_STIRLING_LOCK = threading.Lock()


def fibonacci(n):
    if n < 0:
        raise ValueError(f"Fibonacci index must be nonnegative, got {n}")

    a, b = 0, 1
    for _ in range(n):
        a, b = b, a + b

    return Fraction(a)


def _fibonacci_list(count):
    out = [0, 1]
    while len(out) < count:
        out.append(out[-1] + out[-2])
    return out[:count]


def _stirling_row(n):
    with _STIRLING_LOCK:
        while len(_STIRLING_ROWS) <= n:
            prev = _STIRLING_ROWS[-1]
            k = len(prev)
            row = [0] + [j * (prev[j] if j < k else 0) + prev[j - 1] for j in range(1, k + 1)]
            _STIRLING_ROWS.append(tuple(row))
        return _STIRLING_ROWS[n]


def stirling2(n, j):
    """Stirling number of the second kind S(n, j) from S(n+1, j) = j S(n, j) + S(n, j-1)."""
    if not 0 <= j <= n:
        raise ValueError(f"Stirling index j={j} out of range 0..{n}")
    return Fraction(_stirling_row(n)[j])


def bell_numbers(count):
    """First `count` Bell numbers from the Bell triangle."""
    if count < 1:
        return []

    row = [1]
    bells = [Fraction(1)]
    for _ in range(count - 1):
        new_row = [row[-1]]
        for x in row:
            new_row.append(new_row[-1] + x)
        row = new_row
        bells.append(Fraction(row[0]))

    return bells


def catalan(n):
    return Fraction(comb(2 * n, n), n + 1)


def double_factorial_odd(k):
    """(2k-1)!!, with the empty product for k = 0."""
    result = 1
    for odd in range(1, 2 * k, 2):
        result *= odd
    return Fraction(result)


def rising_factorial(x, n):
    x = as_scalar(x)
    result = Fraction(1)
    for i in range(n):
        result = result * (x + i)
    return result


def touchard(n, lam):
    """Touchard polynomial sum_j S(n, j) lam^j, the n-th moment of Poisson(lam)."""
    lam = as_scalar(lam)
    row = _stirling_row(n)
    result = Fraction(0)
    power = Fraction(1)
    for j in range(n + 1):
        result = result + row[j] * power
        power = power * lam
    return result


class BinetSpectrum(NamedTuple):
    roots: tuple
    weights: tuple


def binet_weights(shift=0, dps=None):
    """Spectral representation F_{n+shift} = w1 phi^n + w2 psi^n.

    For shift 0 this is Binet's formula with weights 1/sqrt(5) and -1/sqrt(5). For odd shifts
    both weights are positive.
    """
    dps = get_precision(dps)
    with mp.workdps(dps):
        sqrt5 = mp.sqrt(5)
        phi = (1 + sqrt5) / 2
        psi = (1 - sqrt5) / 2
        weights = (phi**shift / sqrt5, -(psi**shift) / sqrt5)

    return BinetSpectrum(
        roots=(Real(phi, dps), Real(psi, dps)),
        weights=tuple(Real(w, dps) for w in weights),
    )


class FamilySpec(TaggedSpec):
    offset: ClassVar[int] = 0

    def terms(self, count):
        raise NotImplementedError


def _check_nonnegative(name, value):
    if value < 0:
        raise ValueError(f"{name} must be nonnegative, got {value}")


def _check_positive(name, value):
    if value <= 0:
        raise ValueError(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class Powers(FamilySpec):
    variant: ClassVar[str] = "powers"
    a: object = 1

    def __post_init__(self):
        object.__setattr__(self, "a", as_scalar(self.a))

    def terms(self, count):
        return [self.a**n for n in range(count)]


@dataclass(frozen=True)
class Factorial(FamilySpec):
    variant: ClassVar[str] = "factorial"

    def terms(self, count):
        return [Fraction(factorial(n)) for n in range(count)]


@dataclass(frozen=True)
class GaussianAbs(FamilySpec):
    variant: ClassVar[str] = "gaussian-abs"

    def terms(self, count):
        return [Fraction(0) if n % 2 else double_factorial_odd(n // 2) for n in range(count)]


@dataclass(frozen=True)
class Catalan(FamilySpec):
    variant: ClassVar[str] = "catalan"

    def terms(self, count):
        return [catalan(n) for n in range(count)]


@dataclass(frozen=True)
class InversePowers(FamilySpec):
    variant: ClassVar[str] = "inverse-powers"
    k: object = 0

    def __post_init__(self):
        object.__setattr__(self, "k", as_scalar(self.k))
        if self.k <= -1:
            raise ValueError(f"k must exceed -1, got {self.k}")

    def terms(self, count):
        exponent = self.k + 1
        if isinstance(exponent, Fraction) and exponent.denominator == 1:
            return [Fraction(1, (n + 1) ** exponent.numerator) for n in range(count)]
        return [1 / Real(n + 1) ** exponent for n in range(count)]


@dataclass(frozen=True)
class RisingFactorial(FamilySpec):
    variant: ClassVar[str] = "rising-factorial"
    alpha: object = 1

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_scalar(self.alpha))
        _check_nonnegative("alpha", self.alpha)

    def terms(self, count):
        out = [Fraction(1)]
        for n in range(1, count):
            out.append(out[-1] * (self.alpha + n - 1))
        return out[:count]


@dataclass(frozen=True)
class BetaRatio(FamilySpec):
    variant: ClassVar[str] = "beta-ratio"
    alpha: object = 1
    beta: object = 1

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_scalar(self.alpha))
        object.__setattr__(self, "beta", as_scalar(self.beta))
        _check_positive("alpha", self.alpha)
        _check_positive("beta", self.beta)

    def terms(self, count):
        return [
            rising_factorial(self.alpha, n) / rising_factorial(self.alpha + self.beta, n)
            for n in range(count)
        ]


@dataclass(frozen=True)
class FibShift(FamilySpec):
    """F_{n+shift} for an odd shift 2k+1."""

    variant: ClassVar[str] = "fib-shift"
    shift: int = 1

    def __post_init__(self):
        if self.shift < 1 or self.shift % 2 == 0:
            raise ValueError(f"Fibonacci shift must be a positive odd integer, got {self.shift}")

    def terms(self, count):
        return [Fraction(f) for f in _fibonacci_list(count + self.shift)[self.shift :]]


@dataclass(frozen=True)
class FibEven(FamilySpec):
    variant: ClassVar[str] = "fib-even"

    def terms(self, count):
        fib = _fibonacci_list(2 * count + 1)
        return [Fraction(fib[2 * n + 2]) for n in range(count)]


FIB_AVERAGED_KINDS = (
    "fib-over-index",
    "even-fib-over-index",
    "partial-sum-average",
    "odd-fib-minus-one",
)


@dataclass(frozen=True)
class FibAveraged(FamilySpec):
    """Fibonacci families divided by n + 1.

    which:
        fib-over-index: F_{n+1}/(n+1)
        even-fib-over-index: F_{2n+2}/(n+1)
        partial-sum-average: (F_{n+2}-1)/(n+1), the mean of F_0..F_n
        odd-fib-minus-one: (F_{2n+1}-1)/(n+1), starting at n = 1
    """

    variant: ClassVar[str] = "fib-averaged"
    which: str = "fib-over-index"

    def __post_init__(self):
        if self.which not in FIB_AVERAGED_KINDS:
            raise ValueError(f"Unknown averaged Fibonacci family '{self.which}'")

    @property
    def offset(self):
        return 1 if self.which == "odd-fib-minus-one" else 0

    def terms(self, count):
        first = self.offset
        fib = _fibonacci_list(2 * (count + first) + 2)
        out = []
        for n in range(first, count + first):
            if self.which == "fib-over-index":
                out.append(Fraction(fib[n + 1], n + 1))
            elif self.which == "even-fib-over-index":
                out.append(Fraction(fib[2 * n + 2], n + 1))
            elif self.which == "partial-sum-average":
                out.append(Fraction(fib[n + 2] - 1, n + 1))
            else:
                out.append(Fraction(fib[2 * n + 1] - 1, n + 1))
        return out


@dataclass(frozen=True)
class Touchard(FamilySpec):
    variant: ClassVar[str] = "touchard"
    lam: object = 1

    def __post_init__(self):
        object.__setattr__(self, "lam", as_scalar(self.lam))
        _check_nonnegative("lambda", self.lam)

    def terms(self, count):
        return [touchard(n, self.lam) for n in range(count)]


@dataclass(frozen=True)
class Bell(FamilySpec):
    variant: ClassVar[str] = "bell"

    def terms(self, count):
        return bell_numbers(count)


@dataclass(frozen=True)
class BellShift(FamilySpec):
    variant: ClassVar[str] = "bell-shift"

    def terms(self, count):
        return bell_numbers(count + 1)[1:]


def family_sequence(spec, count):
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")

    provenance = {"family": spec.to_json()}
    if spec.offset:
        provenance["offset"] = spec.offset

    return MomentSequence(tuple(spec.terms(count)), provenance)
