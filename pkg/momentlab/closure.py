"""Operations under which positive moment sequences stay positive moment sequences.

All operations keep the scalar kind of their operands: exact input gives exact output.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial
from typing import ClassVar

import numpy as np
from scipy.optimize import minimize_scalar

from momentlab.numerics import (
    MomentSequence,
    Polynomial,
    TaggedSpec,
    as_scalar,
    format_scalar,
    poly_eval,
    scalar_to_json,
)
from momentlab.sequences import rising_factorial
from momentlab.utils import COROLLARY_SAMPLES, COROLLARY_X_RANGE, require_length

log = logging.getLogger(__name__)


class ChiSpec(TaggedSpec):
    """Probability measure on [0, 1] that generates Hausdorff mean weights."""

    def weight(self, i, n):
        raise NotImplementedError


@dataclass(frozen=True)
class PointMass(ChiSpec):
    variant: ClassVar[str] = "point-mass"
    theta: object = Fraction(1, 2)

    def __post_init__(self):
        object.__setattr__(self, "theta", as_scalar(self.theta))
        if not 0 < self.theta < 1:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")

    def weight(self, i, n):
        return comb(n, i) * self.theta**i * (1 - self.theta) ** (n - i)


@dataclass(frozen=True)
class BetaOneWeight(ChiSpec):
    """Density beta (1-x)^(beta-1) on [0, 1]; beta = 0 is the point mass at 1."""

    variant: ClassVar[str] = "beta-one"
    beta: object = 1

    def __post_init__(self):
        object.__setattr__(self, "beta", as_scalar(self.beta))
        if self.beta < 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")

    def weight(self, i, n):
        if self.beta == 0:
            return Fraction(1 if i == n else 0)
        # beta binom(n, i) Gamma(i+1) Gamma(n-i+beta) / Gamma(n+beta+1)
        return self.beta * comb(n, i) * factorial(i) / rising_factorial(n - i + self.beta, i + 1)


@dataclass(frozen=True)
class Uniform01(ChiSpec):
    variant: ClassVar[str] = "uniform01"

    def weight(self, i, n):
        return Fraction(1, n + 1)


@dataclass(frozen=True)
class HausdorffWeights:
    n: int
    h: tuple


@dataclass(frozen=True)
class DegeneracyReport:
    degenerate: bool
    max_deviation: object
    message: str

    def to_json(self):
        return {
            "degenerate": self.degenerate,
            "max_deviation": (
                None if self.max_deviation is None else scalar_to_json(self.max_deviation)
            ),
            "message": self.message,
        }


@dataclass(frozen=True)
class CorollaryReport:
    nonnegative: bool
    minimum: object
    argmin: float
    degree: int

    def to_json(self):
        return {
            "nonnegative": self.nonnegative,
            "minimum": scalar_to_json(self.minimum),
            "argmin": self.argmin,
            "degree": self.degree,
        }


def _result(values, op, operands, **params):
    provenance = {
        "op": op,
        "operands": [operand.provenance for operand in operands],
    }
    if params:
        provenance["params"] = {key: _param_to_json(val) for key, val in params.items()}
    return MomentSequence(tuple(values), provenance)


def _param_to_json(value):
    if isinstance(value, TaggedSpec):
        return value.to_json()
    if isinstance(value, (int, str)) and not isinstance(value, bool):
        return value
    return scalar_to_json(value)


def _check_equal_lengths(a, b):
    if len(a) != len(b):
        raise ValueError(f"Sequences must have equal lengths, got {len(a)} and {len(b)}")


def _check_nonnegative(name, value):
    if value < 0:
        raise ValueError(f"{name} must be nonnegative, got {value}")


def hausdorff_weights(chi, n):
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    return HausdorffWeights(n, tuple(chi.weight(i, n) for i in range(n + 1)))


def combine_linear(a, b, alpha=1, beta=1):
    alpha, beta = as_scalar(alpha), as_scalar(beta)
    _check_nonnegative("alpha", alpha)
    _check_nonnegative("beta", beta)
    _check_equal_lengths(a, b)

    values = [alpha * x + beta * y for x, y in zip(a, b)]
    return _result(values, "combine-linear", (a, b), alpha=alpha, beta=beta)


def hausdorff_convolve(a, b, alpha=1, beta=1, chi=None, count=None):
    """c_n = sum_i h_{i,n}(chi) alpha^i a_i beta^(n-i) b_(n-i)."""
    chi = Uniform01() if chi is None else chi
    alpha, beta = as_scalar(alpha), as_scalar(beta)
    _check_nonnegative("alpha", alpha)
    _check_nonnegative("beta", beta)
    if count is None:
        count = min(len(a), len(b))
    require_length(a, count, "first operand")
    require_length(b, count, "second operand")

    values = []
    for n in range(count):
        h = hausdorff_weights(chi, n).h
        values.append(
            sum(
                (h[i] * alpha**i * a[i] * beta ** (n - i) * b[n - i] for i in range(n + 1)),
                Fraction(0),
            )
        )

    return _result(values, "hausdorff-convolve", (a, b), alpha=alpha, beta=beta, chi=chi)


def average_convolution(a, b):
    _check_equal_lengths(a, b)
    values = [
        sum((a[i] * b[n - i] for i in range(n + 1)), Fraction(0)) / (n + 1) for n in range(len(a))
    ]
    return _result(values, "average-convolution", (a, b))


def pointwise_product(a, b):
    _check_equal_lengths(a, b)
    return _result([x * y for x, y in zip(a, b)], "product", (a, b))


def subsample(a, k, count=None):
    if k < 1:
        raise ValueError(f"Subsampling step must be at least 1, got {k}")
    if count is None:
        count = (len(a) - 1) // k + 1
    require_length(a, k * (count - 1) + 1)
    return _result([a[k * n] for n in range(count)], "subsample", (a,), k=k)


EMBED_MODES = ("zero-odd", "square-root")


def even_embed(a, mode="zero-odd"):
    """Interleave with zeros.

    zero-odd keeps a_2k and zeroes the odd entries; square-root places a_k at index 2k, the moments
    of a symmetric variable whose square has moments a.
    """
    if mode == "zero-odd":
        values = [Fraction(0) if n % 2 else x for n, x in enumerate(a)]
    elif mode == "square-root":
        if any(x < 0 for x in a):
            raise ValueError("square-root embedding needs nonnegative entries")
        values = []
        for x in a:
            values.extend([x, Fraction(0)])
        values = values[:-1]
    else:
        raise ValueError(f"Unknown embedding mode '{mode}', expected one of {EMBED_MODES}")

    return _result(values, "even-embed", (a,), mode=mode)


def shift(a, s, normalize=False):
    """Entries a_s, a_(s+1), ...; with `normalize` divided by a_s."""
    if s < 2 or s % 2:
        raise ValueError(f"Shift must be an even index of at least 2, got {s}")
    require_length(a, s + 1)

    values = list(a[s:])
    if normalize:
        if values[0] == 0:
            raise ZeroDivisionError(f"Cannot normalize by a_{s} = 0")
        values = [x / values[0] for x in values]

    return _result(values, "shift", (a,), s=s, normalize=str(normalize).lower())


def reflect(a):
    """(-1)^n a_n, the moments of the reflected measure."""
    return _result([-x if n % 2 else x for n, x in enumerate(a)], "reflect", (a,))


def hausdorff_mean(gamma, chi=None):
    """c_n = sum_i h_{i,n}(chi) gamma_i."""
    chi = Uniform01() if chi is None else chi
    values = []
    for n in range(len(gamma)):
        h = hausdorff_weights(chi, n).h
        values.append(sum((h[i] * gamma[i] for i in range(n + 1)), Fraction(0)))
    return _result(values, "hausdorff-mean", (gamma,), chi=chi)


def binomial_transform(a):
    values = [sum((comb(n, i) * a[i] for i in range(n + 1)), Fraction(0)) for n in range(len(a))]
    return _result(values, "binomial-transform", (a,))


def degenerate_diagnose(a, tol=0):
    """Check whether a prefix looks like the moments of a one-point distribution.

    If a_2 = a_1^2 within `tol` the underlying measure must be a point mass at a_1, so the report
    gives the largest deviation |a_n - a_1^n| over the prefix instead of asserting it is zero.
    """
    tol = as_scalar(tol)
    require_length(a, 3)
    if abs(a[0] - 1) > tol:
        raise ValueError(f"Expected a_0 = 1 within {format_scalar(tol)}, got {format_scalar(a[0])}")

    if abs(a[2] - a[1] ** 2) > tol:
        return DegeneracyReport(False, None, "non-degenerate")

    deviation = max(abs(x - a[1] ** n) for n, x in enumerate(a))
    return DegeneracyReport(
        True,
        deviation,
        f"degenerate: a_n should equal a_1^n, max deviation {format_scalar(deviation)}",
    )


def _partial_sum_polynomial(a, n):
    return Polynomial(tuple(a[j] / factorial(j) for j in range(2 * n + 1)))


def exp_partial_sum_check(a, n, x_range=COROLLARY_X_RANGE, samples=COROLLARY_SAMPLES, tol=0):
    """Search for the minimum of p(x) = sum_{j <= 2n} a_j x^j / j! over a finite range.

    A coarse numpy grid locates the smallest sample, then a bounded scipy search refines it
    between the neighbouring grid points. The minimum is re-evaluated at full precision (exactly,
    for exact sequences) at the refined point. This is a numerical search, not a proof.
    """
    require_length(a, 2 * n + 1)
    if samples < 2:
        raise ValueError(f"samples must be at least 2, got {samples}")
    lo, hi = float(x_range[0]), float(x_range[1])
    if not lo < hi:
        raise ValueError(f"Empty search range [{lo}, {hi}]")

    p = _partial_sum_polynomial(a, n)
    float_coeffs = np.array([float(c) for c in p.coeffs] or [0.0])

    grid = np.linspace(lo, hi, samples)
    values = np.polynomial.polynomial.polyval(grid, float_coeffs)
    i = int(np.argmin(values))

    left, right = grid[max(i - 1, 0)], grid[min(i + 1, samples - 1)]
    argmin = float(grid[i])
    if left < right:
        result = minimize_scalar(
            lambda x: np.polynomial.polynomial.polyval(x, float_coeffs),
            bounds=(left, right),
            method="bounded",
            options={"xatol": 1e-12},
        )
        if result.fun <= values[i]:
            argmin = float(result.x)

    minimum = poly_eval(p, Fraction(argmin))
    tol = as_scalar(tol)
    log.debug(f"Partial exponential sum of degree {2 * n}: minimum {format_scalar(minimum, 15)}")

    return CorollaryReport(minimum >= -tol, minimum, argmin, 2 * n)
