"""Probability measures with closed-form moments and high-precision divided moments.

Continuous variants integrate with mpmath tanh-sinh quadrature at the working precision plus
QUADRATURE_GUARD_DIGITS; infinite ranges are handled by mpmath's own interval mapping. Densities
with an algebraic singularity at an end of the support are integrated after a change of variables
that makes the integrand smooth there.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from math import factorial
from typing import ClassVar

import numpy as np
from mpmath import mp, mpf

from momentlab.numerics import (
    MomentSequence,
    Real,
    TaggedSpec,
    as_scalar,
    cauchy_root_bound,
    count_real_roots,
    is_exact,
    parse_scalar,
    poly_eval,
    to_mpf,
)
from momentlab.sequences import catalan, double_factorial_odd, rising_factorial, touchard
from momentlab.utils import (
    CHEBYSHEV_NODES,
    QUADRATURE_GUARD_DIGITS,
    QUADRATURE_MAX_DEGREE,
    QuadratureError,
    SingularDivisorError,
    get_precision,
)

log = logging.getLogger(__name__)


class DivisorVerdict(Enum):
    POSITIVE = "positive"
    SIGN_CHANGING = "sign-changing"
    SINGULAR = "singular"


@dataclass(frozen=True)
class Interval:
    """Closed interval support; None marks an infinite end."""

    lo: object
    hi: object


@dataclass(frozen=True)
class Atoms:
    locations: tuple


@dataclass(frozen=True)
class NonnegativeIntegers:
    pass


class MeasureSpec(TaggedSpec):
    def moment(self, n):
        raise NotImplementedError

    def support(self):
        raise NotImplementedError

    def _density(self, x):
        """Density at an mpf point in the current working precision; None when discrete."""
        return None

    def _breakpoints(self):
        support = self.support()
        return [
            mp.ninf if support.lo is None else to_mpf(support.lo),
            mp.inf if support.hi is None else to_mpf(support.hi),
        ]

    def _integrate(self, f):
        """Integral of f against the measure as (value, error), in the working precision."""
        return _quad(lambda x: self._density(x) * f(x), self._breakpoints())


def _quad(f, points):
    return mp.quad(f, points, error=True, maxdegree=QUADRATURE_MAX_DEGREE)


def _power_weighted_quad(f, alpha, end):
    """Integral of x^(alpha-1) f(x) over [0, end].

    For non-integer alpha the substitution x = t^(1/alpha) turns the weight into the constant
    1/alpha, so the integrand is as smooth as f.
    """
    if isinstance(alpha, Fraction) and alpha.denominator == 1:
        power = alpha.numerator - 1
        return _quad(lambda x: x**power * f(x), [mpf(0), end])

    a = to_mpf(alpha)
    value, error = _quad(lambda t: f(t ** (1 / a)), [mpf(0), end**a])
    return value / a, error / a


def _check_positive(name, value):
    if value <= 0:
        raise ValueError(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class FiniteAtomic(MeasureSpec):
    """Finitely many atoms (location, weight); weights are normalized to total mass 1."""

    variant: ClassVar[str] = "finite-atomic"
    atoms: tuple = ()

    def __post_init__(self):
        atoms = []
        for atom in self.atoms:
            if not isinstance(atom, (list, tuple)) or len(atom) != 2:
                raise ValueError(f"Atoms are (location, weight) pairs, got {atom!r}")
            location, weight = as_scalar(atom[0]), as_scalar(atom[1])
            if weight < 0:
                raise ValueError(f"Atom weight must be nonnegative, got {weight} at {location}")
            atoms.append((location, weight))

        total = sum((w for _, w in atoms), Fraction(0))
        if not atoms or total == 0:
            raise ValueError("Finite atomic measure needs at least one atom with positive weight")

        object.__setattr__(self, "atoms", tuple((x, w / total) for x, w in atoms))

    @classmethod
    def parse_atoms(cls, text):
        """Parse "x1:w1;x2:w2" into a measure; a bare location gets weight 1."""
        atoms = []
        for item in text.split(";"):
            if not item.strip():
                continue
            location, _, weight = item.partition(":")
            atoms.append((parse_scalar(location), parse_scalar(weight or "1")))
        return cls(tuple(atoms))

    def moment(self, n):
        return sum((w * x**n for x, w in self.atoms), Fraction(0))

    def support(self):
        return Atoms(tuple(sorted({x for x, w in self.atoms if w > 0})))


@dataclass(frozen=True)
class Uniform(MeasureSpec):
    variant: ClassVar[str] = "uniform"
    a: object = 0
    b: object = 1

    def __post_init__(self):
        object.__setattr__(self, "a", as_scalar(self.a))
        object.__setattr__(self, "b", as_scalar(self.b))
        if not self.a < self.b:
            raise ValueError(f"Uniform measure needs a < b, got a={self.a}, b={self.b}")

    def moment(self, n):
        return (self.b ** (n + 1) - self.a ** (n + 1)) / ((n + 1) * (self.b - self.a))

    def support(self):
        return Interval(self.a, self.b)

    def _density(self, x):
        return 1 / (to_mpf(self.b) - to_mpf(self.a))


@dataclass(frozen=True)
class ExponentialWeight(MeasureSpec):
    variant: ClassVar[str] = "exponential"

    def moment(self, n):
        return Fraction(factorial(n))

    def support(self):
        return Interval(Fraction(0), None)

    def _density(self, x):
        return mp.exp(-x)

    def _breakpoints(self):
        return [mpf(0), mpf(1), mp.inf]


@dataclass(frozen=True)
class GaussianWeight(MeasureSpec):
    variant: ClassVar[str] = "gaussian"

    def moment(self, n):
        return Fraction(0) if n % 2 else double_factorial_odd(n // 2)

    def support(self):
        return Interval(None, None)

    def _density(self, x):
        return mp.exp(-(x**2) / 2) / mp.sqrt(2 * mp.pi)

    def _breakpoints(self):
        return [mp.ninf, mpf(0), mp.inf]


@dataclass(frozen=True)
class GammaWeight(MeasureSpec):
    variant: ClassVar[str] = "gamma"
    alpha: object = 1

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_scalar(self.alpha))
        _check_positive("alpha", self.alpha)

    def moment(self, n):
        return rising_factorial(self.alpha, n)

    def support(self):
        return Interval(Fraction(0), None)

    def _density(self, x):
        if x <= 0:
            return mpf(0)
        alpha = to_mpf(self.alpha)
        return x ** (alpha - 1) * mp.exp(-x) / mp.gamma(alpha)

    def _integrate(self, f):
        alpha = to_mpf(self.alpha)
        near, near_error = _power_weighted_quad(lambda x: mp.exp(-x) * f(x), self.alpha, mpf(1))
        far, far_error = _quad(lambda x: x ** (alpha - 1) * mp.exp(-x) * f(x), [mpf(1), mp.inf])
        scale = mp.gamma(alpha)
        return (near + far) / scale, (near_error + far_error) / scale


@dataclass(frozen=True)
class BetaWeight(MeasureSpec):
    variant: ClassVar[str] = "beta"
    alpha: object = 1
    beta: object = 1

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_scalar(self.alpha))
        object.__setattr__(self, "beta", as_scalar(self.beta))
        _check_positive("alpha", self.alpha)
        _check_positive("beta", self.beta)

    def moment(self, n):
        return rising_factorial(self.alpha, n) / rising_factorial(self.alpha + self.beta, n)

    def support(self):
        return Interval(Fraction(0), Fraction(1))

    def _density(self, x):
        if x <= 0 or x >= 1:
            return mpf(0)
        alpha, beta = to_mpf(self.alpha), to_mpf(self.beta)
        return x ** (alpha - 1) * (1 - x) ** (beta - 1) / mp.beta(alpha, beta)

    def _integrate(self, f):
        # split at 1/2; each half is a power weight at its own end of [0, 1]
        alpha, beta = to_mpf(self.alpha), to_mpf(self.beta)
        half = mpf(1) / 2
        left, left_error = _power_weighted_quad(
            lambda x: (1 - x) ** (beta - 1) * f(x), self.alpha, half
        )
        right, right_error = _power_weighted_quad(
            lambda y: (1 - y) ** (alpha - 1) * f(1 - y), self.beta, half
        )
        scale = mp.beta(alpha, beta)
        return (left + right) / scale, (left_error + right_error) / scale


@dataclass(frozen=True)
class CatalanArc(MeasureSpec):
    """Density sqrt((4-x)/x)/(2 pi) on [0, 4]; its moments are the Catalan numbers."""

    variant: ClassVar[str] = "catalan-arc"

    def moment(self, n):
        return catalan(n)

    def support(self):
        return Interval(Fraction(0), Fraction(4))

    def _density(self, x):
        if x <= 0 or x >= 4:
            return mpf(0)
        return mp.sqrt((4 - x) / x) / (2 * mp.pi)

    def _integrate(self, f):
        # x = 4 sin^2(t) turns the density into 4 cos^2(t) / pi on [0, pi/2]
        value, error = _quad(lambda t: mp.cos(t) ** 2 * f(4 * mp.sin(t) ** 2), [mpf(0), mp.pi / 2])
        return 4 * value / mp.pi, 4 * error / mp.pi


@dataclass(frozen=True)
class LogWeight(MeasureSpec):
    variant: ClassVar[str] = "log"
    k: object = 0

    def __post_init__(self):
        object.__setattr__(self, "k", as_scalar(self.k))
        if self.k <= -1:
            raise ValueError(f"k must exceed -1, got {self.k}")

    def moment(self, n):
        exponent = self.k + 1
        if isinstance(exponent, Fraction) and exponent.denominator == 1:
            return Fraction(1, (n + 1) ** exponent.numerator)
        return 1 / Real(n + 1) ** exponent

    def support(self):
        return Interval(Fraction(0), Fraction(1))

    def _density(self, x):
        if x <= 0 or x >= 1:
            return mpf(0)
        k = to_mpf(self.k)
        return (-mp.log(x)) ** k / mp.gamma(k + 1)

    def _integrate(self, f):
        # x = exp(-u) maps the log weight onto the gamma weight with alpha = k + 1
        return GammaWeight(self.k + 1)._integrate(lambda u: f(mp.exp(-u)))


@dataclass(frozen=True)
class Poisson(MeasureSpec):
    variant: ClassVar[str] = "poisson"
    lam: object = 1

    def __post_init__(self):
        object.__setattr__(self, "lam", as_scalar(self.lam))
        if self.lam < 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")

    def moment(self, n):
        return touchard(n, self.lam)

    def support(self):
        if self.lam == 0:
            return Atoms((Fraction(0),))
        return NonnegativeIntegers()


MeasureSpec._variants["uniform01"] = Uniform


def moment(spec, n):
    if n < 0:
        raise ValueError(f"Moment index must be nonnegative, got {n}")
    return spec.moment(n)


def moment_sequence(spec, count):
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    return MomentSequence(
        tuple(spec.moment(n) for n in range(count)), {"measure": spec.to_json()}
    )


def support(spec):
    return spec.support()


def density(spec, x, dps=None):
    dps = get_precision(dps)
    with mp.workdps(dps):
        value = spec._density(to_mpf(as_scalar(x, dps)))
    if value is None:
        raise ValueError(f"Measure '{spec.variant}' has no density")
    return Real(value, dps)


def _check_divisor(P):
    if not P:
        raise ValueError("Divisor polynomial must be nonzero")


def _sign_verdict(values):
    if any(v == 0 for v in values):
        return DivisorVerdict.SINGULAR
    if any(v < 0 for v in values):
        return DivisorVerdict.SIGN_CHANGING
    return DivisorVerdict.POSITIVE


def _clip_interval(P, support_):
    bound = cauchy_root_bound(P)
    lo = -bound if support_.lo is None else max(support_.lo, -bound)
    hi = bound if support_.hi is None else min(support_.hi, bound)
    return lo, hi


def _inner_point(support_):
    if support_.lo is not None and support_.hi is not None:
        return (support_.lo + support_.hi) / 2
    if support_.lo is not None:
        return support_.lo + 1
    if support_.hi is not None:
        return support_.hi - 1
    return Fraction(0)


def _validate_on_interval_exact(P, support_):
    if P.degree < 1:
        return _sign_verdict([P.leading])

    lo, hi = _clip_interval(P, support_)
    if lo <= hi and count_real_roots(P, lo, hi) > 0:
        return DivisorVerdict.SINGULAR

    # no root on the support: the sign is constant
    return _sign_verdict([poly_eval(P, _inner_point(support_))])


def _bisect_root(coeffs, lo, hi, f_lo):
    for _ in range(mp.prec):
        mid = (lo + hi) / 2
        f_mid = mp.polyval(coeffs, mid)
        if f_mid == 0:
            return mid
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return (lo + hi) / 2


def _validate_on_interval_sampled(P, support_, dps):
    with mp.workdps(dps):
        coeffs = [to_mpf(c) for c in reversed(P.coeffs)]
        if support_.lo is None or support_.hi is None:
            bound = 1 + max(abs(c / coeffs[0]) for c in coeffs)
        lo = -bound if support_.lo is None else to_mpf(support_.lo)
        hi = bound if support_.hi is None else to_mpf(support_.hi)
        if support_.lo is None or support_.hi is None:
            lo, hi = max(lo, -bound), min(hi, bound)
            if lo > hi:
                # the support lies beyond every root
                return _sign_verdict([mp.polyval(coeffs, to_mpf(_inner_point(support_)))])

        # Chebyshev nodes in ascending order, with both ends included
        t = np.sort(np.cos(np.pi * (np.arange(CHEBYSHEV_NODES) + 0.5) / CHEBYSHEV_NODES))
        nodes = [lo] + [(lo + hi) / 2 + (hi - lo) / 2 * mpf(float(x)) for x in t] + [hi]
        values = [mp.polyval(coeffs, x) for x in nodes]

        scale = max(abs(c) for c in coeffs)
        near_zero = scale * mpf(10) ** (-(dps // 2))
        for x, f_x in zip(nodes, values):
            if abs(f_x) <= near_zero:
                log.debug(f"Divisor vanishes near {mp.nstr(x, 15)}")
                return DivisorVerdict.SINGULAR

        for x, y, f_x, f_y in zip(nodes, nodes[1:], values, values[1:]):
            if (f_x < 0) != (f_y < 0):
                root = _bisect_root(coeffs, x, y, f_x)
                log.debug(f"Divisor changes sign at {mp.nstr(root, 15)}")
                return DivisorVerdict.SINGULAR

        return _sign_verdict(values)


def _integer_root_bound(P):
    """Smallest integer beyond every root of P in absolute value."""
    bound = cauchy_root_bound(P)
    if is_exact(bound):
        return int(bound) + 1
    with mp.workdps(bound.dps):
        return int(mp.floor(bound.value)) + 1


def _validate_on_integers(P):
    bound = _integer_root_bound(P)
    values = [poly_eval(P, j) for j in range(bound + 1)]
    values.append(P.leading)
    return _sign_verdict(values)


def validate_divisor(spec, P, dps=None):
    """Decide whether 1/P is a positive, sign-changing or singular density factor on the support.

    Returns:
        DivisorVerdict: SINGULAR when P vanishes on the support, SIGN_CHANGING when P is negative
        somewhere on it, POSITIVE otherwise
    """
    _check_divisor(P)
    dps = get_precision(dps)
    support_ = spec.support()

    if isinstance(support_, Atoms):
        verdict = _sign_verdict([poly_eval(P, x) for x in support_.locations])
    elif isinstance(support_, NonnegativeIntegers):
        verdict = _validate_on_integers(P)
    elif P.is_exact and all(is_exact(x) for x in (support_.lo, support_.hi) if x is not None):
        verdict = _validate_on_interval_exact(P, support_)
    else:
        verdict = _validate_on_interval_sampled(P, support_, dps)

    if verdict is not DivisorVerdict.POSITIVE:
        log.warning(f"Divisor {P} is {verdict.value} on the support of '{spec.variant}'")

    return verdict


def _atomic_divided_moment(spec, P, k):
    total = Fraction(0)
    for x, w in spec.atoms:
        if w == 0:
            continue
        p_x = poly_eval(P, x)
        if p_x == 0:
            raise SingularDivisorError(f"Divisor {P} vanishes at the atom {x}")
        total = total + w * x**k / p_x
    return total


def _poisson_divided_moment(spec, P, k, dps):
    if spec.lam == 0:
        p_0 = poly_eval(P, 0)
        if p_0 == 0:
            raise SingularDivisorError(f"Divisor {P} vanishes at the atom 0")
        return Fraction(0) ** k / p_0

    if P.is_exact:
        for j in range(_integer_root_bound(P) + 1):
            if poly_eval(P, j) == 0:
                raise SingularDivisorError(f"Divisor {P} vanishes at the atom {j}")

    with mp.workdps(dps + QUADRATURE_GUARD_DIGITS):
        lam = to_mpf(spec.lam)
        eps = mpf(10) ** (-dps)
        weight = mp.exp(-lam)
        total = mpf(0)
        j = 0
        while True:
            p_j = to_mpf(poly_eval(P, j))
            if p_j == 0:
                raise SingularDivisorError(f"Divisor {P} vanishes at the atom {j}")
            term = weight * mpf(j) ** k / p_j
            total += term

            weight = weight * lam / (j + 1)
            if j + 2 > lam:
                tail = weight / (1 - lam / (j + 2))
                if tail < eps and abs(term) < eps:
                    break
            j += 1

    log.debug(f"Poisson divided moment k={k} truncated after {j + 1} atoms")
    return Real(total, dps)


def _continuous_divided_moment(spec, P, k, dps):
    tolerance = mpf(10) ** (-(dps - 10))
    with mp.workdps(dps + QUADRATURE_GUARD_DIGITS):
        coeffs = [to_mpf(c) for c in reversed(P.coeffs)]

        def integrand(x):
            return x**k / mp.polyval(coeffs, x)

        try:
            value, error = spec._integrate(integrand)
        except ZeroDivisionError:
            raise SingularDivisorError(f"Divisor {P} vanishes at a quadrature node") from None

        log.debug(f"Quadrature of x^{k}/P over {spec.variant}: error {mp.nstr(error, 5)}")
        if not mp.isfinite(value) or error > tolerance:
            raise QuadratureError(
                f"Quadrature of x^{k}/({P}) over '{spec.variant}' did not converge "
                f"(error estimate {mp.nstr(error, 5)}); is a root of P close to the support?"
            )

    return Real(value, dps)


def _divided_moment(spec, P, k, dps):
    if isinstance(spec, FiniteAtomic):
        return _atomic_divided_moment(spec, P, k)
    if isinstance(spec, Poisson):
        return _poisson_divided_moment(spec, P, k, dps)
    return _continuous_divided_moment(spec, P, k, dps)


def divided_moment(spec, P, k, dps=None):
    """The k-th moment of dA/P, i.e. the integral of x^k / P(x) against the measure.

    Finite atomic measures give exact sums for exact data; Poisson sums are truncated once the
    weight tail and the terms fall below 10^-dps; continuous measures use quadrature with an
    absolute error target of 10^-(dps-10).
    """
    if k < 0:
        raise ValueError(f"Moment index must be nonnegative, got {k}")
    divided_moments(spec, P, 0, dps)
    return _divided_moment(spec, P, k, get_precision(dps))


def divided_moments(spec, P, count, dps=None):
    """The first `count` divided moments with a single divisor check.

    Returns:
        tuple: (list of scalars, DivisorVerdict)
    """
    dps = get_precision(dps)
    verdict = validate_divisor(spec, P, dps)
    if verdict is DivisorVerdict.SINGULAR:
        raise SingularDivisorError(f"Divisor {P} vanishes on the support of '{spec.variant}'")

    return [_divided_moment(spec, P, k, dps) for k in range(count)], verdict
