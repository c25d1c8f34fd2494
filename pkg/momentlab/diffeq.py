"""Linear difference equations with constant coefficients.

An equation sum_j d_j r_(n+j) = c_n of order m is always solved by forward recurrence from its m
initial conditions; closed forms appear only in the cross-check helpers. The moments of dA/P follow
such an equation with the coefficients of P and the moments of dA as the forcing sequence.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import ClassVar, Optional

from momentlab import measures
from momentlab.hankel import HankelReport, Verdict, check_pm, default_max_order
from momentlab.measures import DivisorVerdict, MeasureSpec
from momentlab.numerics import (
    MomentSequence,
    Polynomial,
    TaggedSpec,
    as_scalar,
    format_scalar,
    poly_from_roots,
    promote,
    scalar_from_json,
    scalar_to_json,
    solve_linear,
)
from momentlab.sequences import FamilySpec, Powers
from momentlab.utils import InsufficientLengthError, get_precision

log = logging.getLogger(__name__)


class SequenceSource(TaggedSpec):
    """Forcing sequence of a difference equation."""

    def terms(self, count):
        raise NotImplementedError


@dataclass(frozen=True)
class Zero(SequenceSource):
    variant: ClassVar[str] = "zero"

    def terms(self, count):
        return [Fraction(0)] * count


@dataclass(frozen=True)
class Explicit(SequenceSource):
    variant: ClassVar[str] = "explicit"
    values: MomentSequence = field(default_factory=lambda: MomentSequence(()))

    def __post_init__(self):
        if not isinstance(self.values, MomentSequence):
            object.__setattr__(self, "values", MomentSequence(tuple(self.values)))

    def terms(self, count):
        if count > len(self.values):
            raise InsufficientLengthError(
                f"Forcing sequence has {len(self.values)} entries, {count} needed"
            )
        return list(self.values[:count])


@dataclass(frozen=True)
class Measure(SequenceSource):
    variant: ClassVar[str] = "measure"
    spec: MeasureSpec = None

    def __post_init__(self):
        if isinstance(self.spec, dict):
            object.__setattr__(self, "spec", MeasureSpec.from_json(self.spec))
        if not isinstance(self.spec, MeasureSpec):
            raise ValueError(f"Measure source needs a measure spec, got {self.spec!r}")

    def terms(self, count):
        return [self.spec.moment(n) for n in range(count)]


@dataclass(frozen=True)
class Family(SequenceSource):
    variant: ClassVar[str] = "family"
    spec: FamilySpec = None

    def __post_init__(self):
        if isinstance(self.spec, dict):
            object.__setattr__(self, "spec", FamilySpec.from_json(self.spec))
        if not isinstance(self.spec, FamilySpec):
            raise ValueError(f"Family source needs a family spec, got {self.spec!r}")

    def terms(self, count):
        return self.spec.terms(count)


@dataclass(frozen=True)
class DifferenceEquation:
    """sum_j coeffs[j] r_(n+j) = forcing[n] with r_0..r_(m-1) given by `initial`."""

    coeffs: tuple
    forcing: SequenceSource = field(default_factory=Zero)
    initial: tuple = ()

    def __post_init__(self):
        coeffs = tuple(as_scalar(c) for c in self.coeffs)
        if len(coeffs) < 2:
            raise ValueError(f"Equation order must be at least 1, got coefficients {coeffs}")
        if coeffs[-1] == 0:
            raise ValueError("Leading coefficient d_m must be nonzero")

        initial = tuple(as_scalar(p) for p in self.initial)
        if len(initial) != len(coeffs) - 1:
            raise ValueError(
                f"Equation of order {len(coeffs) - 1} needs {len(coeffs) - 1} initial "
                f"conditions, got {len(initial)}"
            )

        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "initial", initial)

    @property
    def order(self):
        return len(self.coeffs) - 1

    def to_json(self):
        return {
            "coeffs": [scalar_to_json(c) for c in self.coeffs],
            "initial": [scalar_to_json(p) for p in self.initial],
            "input": self.forcing.to_json(),
        }

    @classmethod
    def from_json(cls, data):
        if not isinstance(data, dict) or "coeffs" not in data:
            raise ValueError("Equation JSON needs a 'coeffs' list")
        forcing = SequenceSource.from_json(data.get("input", {"variant": "zero"}))
        return cls(
            tuple(scalar_from_json(c) for c in data["coeffs"]),
            forcing,
            tuple(scalar_from_json(p) for p in data.get("initial", [])),
        )


@dataclass(frozen=True)
class SpectralSystem:
    """r_n = sum_k weights[k] roots[k]^n for pairwise distinct roots."""

    roots: tuple
    weights: tuple

    def __post_init__(self):
        roots = tuple(as_scalar(b) for b in self.roots)
        weights = tuple(as_scalar(w) for w in self.weights)
        if not roots:
            raise ValueError("Spectral system needs at least one root")
        if len(roots) != len(weights):
            raise ValueError(f"Got {len(roots)} roots but {len(weights)} weights")
        _check_distinct(roots)

        object.__setattr__(self, "roots", roots)
        object.__setattr__(self, "weights", weights)

    def values(self, count):
        return [
            sum((w * b**n for b, w in zip(self.roots, self.weights)), Fraction(0))
            for n in range(count)
        ]


@dataclass(frozen=True)
class WeightsResult:
    weights: tuple
    nonnegative: bool


@dataclass(frozen=True)
class ClosedFormCheck:
    """Forward-recurrence solution compared with a closed form and expected Hankel values."""

    sequence: MomentSequence
    expected: tuple
    matches: bool
    max_deviation: object
    report: HankelReport
    expected_dets: tuple
    dets_match: bool

    def to_json(self):
        return {
            "sequence": self.sequence.to_json(),
            "expected": [scalar_to_json(x) for x in self.expected],
            "matches": self.matches,
            "max_deviation": scalar_to_json(self.max_deviation),
            "hankel": self.report.to_json(),
            "expected_dets": [scalar_to_json(x) for x in self.expected_dets],
            "dets_match": self.dets_match,
        }


@dataclass(frozen=True)
class SweepRow:
    delta: object
    first_negative_index: Optional[int]
    dets: tuple
    verdict: Verdict

    def to_json(self):
        return {
            "delta": scalar_to_json(self.delta),
            "first_negative_index": self.first_negative_index,
            "dets": [scalar_to_json(d) for d in self.dets],
            "verdict": self.verdict.value,
        }


def _check_distinct(roots):
    for i, b in enumerate(roots):
        if any(b == other for other in roots[i + 1 :]):
            raise ValueError(f"Roots must be pairwise distinct, {format_scalar(b)} is repeated")


def solve(eq, count):
    """First `count` terms of the solution by forward recurrence.

    r_(n+m) = (c_n - sum_{j<m} d_j r_(n+j)) / d_m; exact when every input is exact.
    """
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")

    m = eq.order
    r = list(eq.initial[:count])
    forcing = eq.forcing.terms(max(count - m, 0))
    for n in range(count - m):
        acc = forcing[n]
        for j in range(m):
            acc = acc - eq.coeffs[j] * r[n + j]
        r.append(acc / eq.coeffs[m])

    return MomentSequence(tuple(r), {"equation": eq.to_json()})


def residual(eq, seq):
    """sum_j d_j r_(n+j) - c_n for every n the prefix covers."""
    m = eq.order
    count = max(len(seq) - m, 0)
    forcing = eq.forcing.terms(count)
    return [
        sum((eq.coeffs[j] * seq[n + j] for j in range(m + 1)), Fraction(0)) - forcing[n]
        for n in range(count)
    ]


def characteristic_polynomial(eq):
    return Polynomial(eq.coeffs)


def homogeneous_from_spectrum(system, count):
    """The sequence sum_k w_k b_k^n and the homogeneous equation it satisfies.

    The coefficient of r_(n+m-j) is (-1)^j S_j(b), S_j the elementary symmetric functions.
    """
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")

    m = len(system.roots)
    values = system.values(max(count, m))
    eq = DifferenceEquation(poly_from_roots(system.roots).coeffs, Zero(), tuple(values[:m]))
    spectrum = {
        "roots": [scalar_to_json(b) for b in system.roots],
        "weights": [scalar_to_json(w) for w in system.weights],
    }
    sequence = MomentSequence(tuple(values[:count]), {"spectrum": spectrum})

    return sequence, eq


def weights_from_initial(roots, initial):
    """Solve the Vandermonde system sum_j w_j b_j^k = p_k, k < m, for the spectral weights."""
    roots = tuple(as_scalar(b) for b in roots)
    initial = tuple(as_scalar(p) for p in initial)
    if len(roots) != len(initial):
        raise ValueError(f"Got {len(roots)} roots but {len(initial)} initial values")
    _check_distinct(roots)

    vandermonde = [[b**k for b in roots] for k in range(len(roots))]
    weights = tuple(promote(solve_linear(vandermonde, initial)))

    return WeightsResult(weights, all(w >= 0 for w in weights))


def _divided_pipeline(spec, P, count, initial, divisor_verdict, max_order):
    eq = DifferenceEquation(P.coeffs, Measure(spec), tuple(initial))
    sequence = solve(eq, count)

    provenance = dict(sequence.provenance)
    provenance["measure"] = spec.to_json()
    provenance["divisor"] = str(P)
    provenance["divisor_verdict"] = divisor_verdict.value
    if divisor_verdict is DivisorVerdict.SIGN_CHANGING:
        provenance["warning"] = "divisor is not positive on the support; dA/P is a signed measure"
    sequence = MomentSequence(sequence.values, provenance)

    return sequence, check_pm(sequence, max_order)


def divided_measure_moments(spec, P, count, max_order=None, dps=None):
    """Moments of dB = dA/P by forward recurrence.

    The first deg P moments come from measures.divided_moment; the rest follow from
    sum_j c_j b_(n+j) = a_n with P = sum_j c_j x^j and a_n the moments of dA.

    Returns:
        tuple: (MomentSequence, HankelReport)
    """
    if P.degree < 1:
        raise ValueError(f"Divisor must have degree at least 1, got {P}")
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")

    initial, verdict = measures.divided_moments(spec, P, P.degree, get_precision(dps))
    if max_order is None:
        max_order = (count - 1) // 2

    return _divided_pipeline(spec, P, count, initial, verdict, max_order)


def first_order_solution_check(a, d, p0, count):
    """r_(n+1) - a r_n = d^n, r_0 = p0 against (a^n - d^n)/(a - d) + p0 a^n.

    The Hankel transform is expected to read p0, p0 (d - a) - 1, 0.
    """
    a, d, p0 = as_scalar(a), as_scalar(d), as_scalar(p0)
    if a == d:
        raise ValueError(f"a and d must differ, both are {format_scalar(a)}")

    eq = DifferenceEquation((-a, Fraction(1)), Family(Powers(d)), (p0,))
    expected = [(a**n - d**n) / (a - d) + p0 * a**n for n in range(count)]
    expected_dets = (p0, p0 * (d - a) - 1, Fraction(0))

    return _closed_form_check(eq, count, expected, expected_dets)


def double_root_check(a, r1, count):
    """r_(n+2) - 2a r_(n+1) + a^2 r_n = 0, r = (1, r1, ...) against a^(n-1) (n r1 - a (n-1)).

    The Hankel transform is expected to read 1, -(r1 - a)^2, 0, so the sequence is not a positive
    moment sequence unless r1 = a.
    """
    a, r1 = as_scalar(a), as_scalar(r1)
    if a == 0:
        raise ValueError("a must be nonzero")

    eq = DifferenceEquation((a**2, -2 * a, Fraction(1)), Zero(), (Fraction(1), r1))
    expected = [a ** (n - 1) * (n * r1 - a * (n - 1)) for n in range(count)]
    expected_dets = (Fraction(1), -((r1 - a) ** 2), Fraction(0))

    return _closed_form_check(eq, count, expected, expected_dets)


def convolution_solution_check(b, source, count):
    """r_(n+1) - b r_n = a_n with r_0 = 0 against sum_{j<n} b^(n-1-j) a_j."""
    b = as_scalar(b)
    eq = DifferenceEquation((-b, Fraction(1)), source, (Fraction(0),))
    forcing = source.terms(max(count - 1, 0))
    expected = [
        sum((b ** (n - 1 - j) * forcing[j] for j in range(n)), Fraction(0)) for n in range(count)
    ]

    return _closed_form_check(eq, count, expected, ())


def _closed_form_check(eq, count, expected, expected_dets):
    sequence = solve(eq, count)
    deviation = max(abs(x - y) for x, y in zip(sequence, expected))
    max_order = min(len(expected_dets) - 1, default_max_order(sequence))
    if max_order < 0:
        max_order = default_max_order(sequence)
    report = check_pm(sequence, max_order)

    tolerance = report.zero_threshold
    dets_match = all(abs(det - want) <= tolerance for det, want in zip(report.dets, expected_dets))

    return ClosedFormCheck(
        sequence=sequence,
        expected=tuple(expected),
        matches=deviation <= tolerance,
        max_deviation=deviation,
        report=report,
        expected_dets=tuple(expected_dets[: max_order + 1]),
        dets_match=dets_match,
    )


def complex_root_forcing_check(a, b, r0, r1, count):
    """Solve r_(n+2) + a^2 r_n = b^n and report its Hankel transform.

    b = 0 uses the zero forcing sequence, the homogeneous case of the same equation.
    """
    a, b = as_scalar(a), as_scalar(b)
    if a == 0:
        raise ValueError("a must be nonzero")

    forcing = Zero() if b == 0 else Family(Powers(b))
    eq = DifferenceEquation((a**2, Fraction(0), Fraction(1)), forcing, (r0, r1))
    return check_pm(solve(eq, count))


def complex_root_expected_dets(a, b, r1):
    """Hankel determinants of orders 0..3 when r_0 = 1/(a^2 + b^2)."""
    a, b, r1 = as_scalar(a), as_scalar(b), as_scalar(r1)
    s = a**2 + b**2
    return (
        1 / s,
        (b - r1 * s) * (b + r1 * s) / s**2,
        -((b - r1 * s) ** 2) / s,
        Fraction(0),
    )


def _sweep_row(spec, P, count, initial, divisor_verdict, max_order, perturbed_index, delta):
    perturbed = list(initial)
    perturbed[perturbed_index] = perturbed[perturbed_index] + delta
    _, report = _divided_pipeline(spec, P, count, perturbed, divisor_verdict, max_order)
    return SweepRow(delta, report.first_negative_index, report.dets, report.verdict)


def sensitivity_sweep(spec, P, perturbed_index, deltas, count, max_order=None, dps=None, workers=1):
    """Re-run the divided-moment recurrence with one initial condition perturbed by each delta.

    The initial conditions are computed once, so delta = 0 reproduces the unperturbed run exactly.
    With workers > 1 the rows are computed in a process pool; the row order follows `deltas`.
    """
    if not 0 <= perturbed_index < P.degree:
        raise ValueError(f"Perturbed index must lie in 0..{P.degree - 1}, got {perturbed_index}")
    if max_order is None:
        max_order = (count - 1) // 2
    if count < 2 * max_order + 1:
        raise InsufficientLengthError(f"count {count} is too small for Hankel order {max_order}")

    initial, verdict = measures.divided_moments(spec, P, P.degree, get_precision(dps))
    deltas = [as_scalar(delta) for delta in deltas]
    args = [
        (spec, P, count, initial, verdict, max_order, perturbed_index, delta) for delta in deltas
    ]

    if workers > 1 and len(args) > 1:
        log.info(f"Sweeping {len(args)} perturbations on {workers} worker processes")
        with ProcessPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(_sweep_row, *zip(*args)))
    else:
        rows = []
        for i, arg in enumerate(args):
            rows.append(_sweep_row(*arg))
            log.info(f"Sweep {i + 1}/{len(args)}: delta {format_scalar(arg[-1], 10)}")

    return rows
