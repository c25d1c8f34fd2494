"""Hankel matrices, Hankel transforms and the positive moment sequence tests built on them."""

import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional

from mpmath import mp, mpf

from momentlab.numerics import Real, determinant, format_scalar, scalar_to_json
from momentlab.utils import require_length

log = logging.getLogger(__name__)


class Verdict(Enum):
    PM_CONSISTENT = "pm-consistent"
    NOT_PM = "not-pm"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class HankelReport:
    """Hankel transform prefix together with the positivity verdict.

    `first_negative_index` is the first order whose determinant lies below -zero_threshold. It is
    also reported for inconclusive verdicts, where a determinant inside the zero band precedes it.
    """

    dets: tuple
    first_negative_index: Optional[int]
    rank_drop_index: Optional[int]
    verdict: Verdict
    zero_threshold: object
    max_order: int

    def to_json(self):
        return {
            "dets": [scalar_to_json(d) for d in self.dets],
            "first_negative_index": self.first_negative_index,
            "rank_drop_index": self.rank_drop_index,
            "verdict": self.verdict.value,
            "zero_threshold": scalar_to_json(self.zero_threshold),
            "max_order": self.max_order,
        }


@dataclass(frozen=True)
class InequalityViolation:
    name: str
    indices: tuple
    lhs: object
    rhs: object

    def __str__(self):
        return f"{self.name} {self.indices}: {format_scalar(self.lhs)} > {format_scalar(self.rhs)}"

    def to_json(self):
        return {
            "name": self.name,
            "indices": list(self.indices),
            "lhs": scalar_to_json(self.lhs),
            "rhs": scalar_to_json(self.rhs),
        }


def default_max_order(seq):
    return (len(seq) - 1) // 2


def hankel_matrix(seq, n):
    require_length(seq, 2 * n + 1)
    return [[seq[i + j] for j in range(n + 1)] for i in range(n + 1)]


def hankel_transform(seq, max_order=None):
    if max_order is None:
        max_order = default_max_order(seq)
    require_length(seq, 2 * max_order + 1)
    return [determinant(hankel_matrix(seq, n)) for n in range(max_order + 1)]


def default_zero_threshold(seq, max_order=None):
    """Zero band for Hankel determinants.

    Exact sequences use 0. Real sequences use 10^-(dps/2) * max(1, largest |entry|)^(max_order+1),
    where the largest entry is taken over the entries the determinants actually use.
    """
    if seq.kind == "exact":
        return Fraction(0)

    if max_order is None:
        max_order = default_max_order(seq)
    dps = seq.precision
    with mp.workdps(dps):
        scale = max([mpf(1)] + [abs(x.value) for x in seq.values[: 2 * max_order + 1]])
        threshold = mpf(10) ** (-(dps // 2)) * scale ** (max_order + 1)

    return Real(threshold, dps)


def _rank_drop(dets, threshold):
    drop = None
    for n in range(len(dets) - 1, -1, -1):
        if abs(dets[n]) > threshold:
            break
        drop = n
    return drop


def check_pm(seq, max_order=None, zero_threshold=None):
    """Hankel positivity test up to `max_order`.

    The verdict is a necessary-condition certificate for the finite prefix, never a proof for the
    infinite sequence.
    """
    if max_order is None:
        max_order = default_max_order(seq)
    require_length(seq, 2 * max_order + 1)
    if zero_threshold is None:
        zero_threshold = default_zero_threshold(seq, max_order)

    dets = hankel_transform(seq, max_order)

    first_negative = None
    borderline = False
    for n, det in enumerate(dets):
        if det < -zero_threshold:
            first_negative = n
            break
        if zero_threshold > 0 and abs(det) <= zero_threshold:
            borderline = True

    if first_negative is None:
        verdict = Verdict.PM_CONSISTENT
    elif borderline:
        verdict = Verdict.INCONCLUSIVE
    else:
        verdict = Verdict.NOT_PM

    report = HankelReport(
        dets=tuple(dets),
        first_negative_index=first_negative,
        rank_drop_index=_rank_drop(dets, zero_threshold),
        verdict=verdict,
        zero_threshold=zero_threshold,
        max_order=max_order,
    )
    log.debug(f"Hankel check up to order {max_order}: {verdict.value}")

    return report


def rank_detect(seq, max_order=None, zero_threshold=None):
    return check_pm(seq, max_order, zero_threshold).rank_drop_index


def _exceeds(lhs, rhs, tol):
    if tol == 0:
        return lhs > rhs
    return lhs - rhs > tol * max(abs(lhs), abs(rhs))


def moment_inequality_report(seq, nonneg_support=False):
    """Check the elementary moment inequalities on a prefix normalized to m_0 = 1.

    Root comparisons use their power forms, m_2n^(n+1) <= m_2n+2^n and m_n^(n+1) <= m_n+1^n, so
    exact input gives exact decisions. Real input is compared with relative tolerance
    10^-(dps-10).

    Returns:
        list of InequalityViolation, empty when every applicable inequality holds
    """
    if not len(seq):
        return []
    if seq[0] <= 0:
        return [InequalityViolation("total-mass", (0,), Fraction(0), seq[0])]

    m = [x / seq[0] for x in seq]
    if seq.kind == "exact":
        tol = Fraction(0)
    else:
        tol = Real(10, seq.precision) ** (10 - seq.precision)

    violations = []
    count = len(m)

    for i in range(0, count, 1 if nonneg_support else 2):
        if m[i] < 0:
            name = "nonnegative-moment" if i % 2 else "even-moment"
            violations.append(InequalityViolation(name, (i,), Fraction(0), m[i]))

    for n in range((count + 1) // 2):
        for k in range(n + 1):
            lhs, rhs = m[n] ** 2, m[2 * (n - k)] * m[2 * k]
            if _exceeds(lhs, rhs, tol):
                violations.append(InequalityViolation("cauchy-schwarz", (n, k), lhs, rhs))

    for n in range(1, (count - 1) // 2):
        a, b = m[2 * n], m[2 * n + 2]
        if a < 0 or b < 0:
            continue
        lhs, rhs = a ** (n + 1), b**n
        if _exceeds(lhs, rhs, tol):
            violations.append(
                InequalityViolation("even-root-monotonicity", (2 * n, 2 * n + 2), lhs, rhs)
            )

    if nonneg_support:
        for n in range(1, count - 1):
            a, b = m[n], m[n + 1]
            if a < 0 or b < 0:
                continue
            lhs, rhs = a ** (n + 1), b**n
            if _exceeds(lhs, rhs, tol):
                violations.append(InequalityViolation("root-monotonicity", (n, n + 1), lhs, rhs))

    return violations
