"""Scalar tower, polynomials, determinants and the moment sequence container.

A scalar is either an exact rational (:class:`fractions.Fraction`, always in lowest terms with a
positive denominator) or a :class:`Real`, an mpmath float carried together with its working
precision in decimal digits. Mixing the two promotes the rational to a real at the precision of the
real operand; two reals combine at the larger of their precisions.
"""

import logging
import operator
import re
from dataclasses import dataclass, field, fields
from fractions import Fraction
from typing import ClassVar

import mpmath
from mpmath import mp, mpf

from momentlab.utils import get_precision

log = logging.getLogger(__name__)

_INTEGER_RE = re.compile(r"^[+-]?\d+$")
_RATIONAL_RE = re.compile(r"^[+-]?\d+/\d+$")


def _fraction_to_mpf(value):
    # must be called inside the target working precision
    if isinstance(value, Fraction):
        return mpf(value.numerator) / value.denominator
    return mpf(value)


class Real:
    """A high-precision real number together with its precision in decimal digits."""

    __slots__ = ("value", "dps")

    def __init__(self, value, dps=None):
        if isinstance(value, Real):
            dps = value.dps if dps is None else dps
            value = value.value
        dps = get_precision(dps)
        with mp.workdps(dps):
            if isinstance(value, (int, Fraction)):
                value = _fraction_to_mpf(value)
            value = +mpf(value)

        if not mpmath.isfinite(value):
            raise ValueError(f"Real values must be finite, got {value}")

        object.__setattr__(self, "value", value)
        object.__setattr__(self, "dps", dps)

    def __setattr__(self, name, value):
        raise AttributeError("Real is immutable")

    def __reduce__(self):
        return (Real, (self.value, self.dps))

    def _apply(self, other, op, reverse=False):
        if isinstance(other, Real):
            dps = max(self.dps, other.dps)
        elif isinstance(other, (int, Fraction)):
            dps = self.dps
        else:
            return NotImplemented

        with mp.workdps(dps):
            left = self.value
            right = other.value if isinstance(other, Real) else _fraction_to_mpf(other)
            result = op(right, left) if reverse else op(left, right)

        if isinstance(result, mpmath.mpc):
            raise ValueError(f"Operation on real operands produced a complex value: {result}")

        return Real(result, dps)

    def __add__(self, other):
        return self._apply(other, operator.add)

    def __radd__(self, other):
        return self._apply(other, operator.add, reverse=True)

    def __sub__(self, other):
        return self._apply(other, operator.sub)

    def __rsub__(self, other):
        return self._apply(other, operator.sub, reverse=True)

    def __mul__(self, other):
        return self._apply(other, operator.mul)

    def __rmul__(self, other):
        return self._apply(other, operator.mul, reverse=True)

    def __truediv__(self, other):
        if other == 0:
            raise ZeroDivisionError("Division by zero")
        return self._apply(other, operator.truediv)

    def __rtruediv__(self, other):
        if not self:
            raise ZeroDivisionError("Division by zero")
        return self._apply(other, operator.truediv, reverse=True)

    def __pow__(self, exponent):
        if isinstance(exponent, int):
            if exponent < 0 and not self:
                raise ZeroDivisionError("Zero raised to a negative power")
            with mp.workdps(self.dps):
                return Real(self.value**exponent, self.dps)
        return self._apply(exponent, operator.pow)

    def __rpow__(self, base):
        return self._apply(base, operator.pow, reverse=True)

    def __neg__(self):
        return Real(-self.value, self.dps)

    def __pos__(self):
        return self

    def __abs__(self):
        return Real(abs(self.value), self.dps)

    def __bool__(self):
        return bool(self.value)

    def __float__(self):
        return float(self.value)

    def _compare(self, other, op):
        if isinstance(other, Real):
            dps = max(self.dps, other.dps)
        elif isinstance(other, (int, Fraction)):
            dps = self.dps
        else:
            return NotImplemented

        with mp.workdps(dps):
            right = other.value if isinstance(other, Real) else _fraction_to_mpf(other)
            return op(self.value, right)

    def __eq__(self, other):
        return self._compare(other, operator.eq)

    def __lt__(self, other):
        return self._compare(other, operator.lt)

    def __le__(self, other):
        return self._compare(other, operator.le)

    def __gt__(self, other):
        return self._compare(other, operator.gt)

    def __ge__(self, other):
        return self._compare(other, operator.ge)

    def __hash__(self):
        return hash(self.value)

    def __str__(self):
        return mpmath.nstr(self.value, self.dps)

    def __repr__(self):
        return f"Real('{self}', dps={self.dps})"


def is_exact(x):
    return isinstance(x, (int, Fraction))


def parse_scalar(text, dps=None, exact_decimals=True):
    """Parse a scalar from text.

    Integers and "p/q" always give exact rationals. Decimal strings give exact rationals when
    `exact_decimals` is set (command-line parameters), otherwise a Real (serialized data).
    """
    text = text.strip()
    if _INTEGER_RE.match(text) or _RATIONAL_RE.match(text):
        return Fraction(text)

    if exact_decimals:
        try:
            return Fraction(text)
        except ValueError:
            raise ValueError(f"Cannot parse '{text}' as a number") from None

    if dps is None:
        mantissa = re.split(r"[eE]", text)[0]
        digits = len(re.sub(r"\D", "", mantissa).lstrip("0"))
        dps = max(get_precision(), digits)

    try:
        return Real(text, dps)
    except (ValueError, TypeError):
        raise ValueError(f"Cannot parse '{text}' as a number") from None


def as_scalar(x, dps=None):
    if isinstance(x, (Fraction, Real)):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Real(x, dps)
    if isinstance(x, str):
        return parse_scalar(x, dps, exact_decimals=False)
    if isinstance(x, mpf):
        return Real(x, dps)
    raise TypeError(f"Cannot interpret {x!r} as a scalar")


def to_mpf(x):
    """Convert a scalar to an mpf at the current mpmath working precision."""
    if isinstance(x, Real):
        return +x.value
    return _fraction_to_mpf(x)


def common_precision(values):
    """Largest precision among the real values, or None when all values are exact."""
    precisions = [x.dps for x in values if isinstance(x, Real)]
    return max(precisions) if precisions else None


def promote(values):
    """Bring values to a uniform kind: all exact, or all reals at the largest precision."""
    values = [as_scalar(x) for x in values]
    dps = common_precision(values)
    if dps is None:
        return values
    return [Real(x, dps) for x in values]


def to_real(x, dps=None):
    if isinstance(x, Real) and dps is None:
        return x
    return Real(as_scalar(x), dps if dps is not None else getattr(x, "dps", None))


def scalar_to_json(x):
    x = as_scalar(x)
    if isinstance(x, Fraction):
        return [str(x.numerator), str(x.denominator)]
    return str(x)


def scalar_from_json(obj, dps=None):
    if isinstance(obj, list):
        if len(obj) != 2:
            raise ValueError(f"Exact scalars are [num, den] pairs, got {obj}")
        return Fraction(int(obj[0]), int(obj[1]))
    if isinstance(obj, bool):
        raise ValueError(f"Not a scalar: {obj}")
    if isinstance(obj, int):
        return Fraction(obj)
    if isinstance(obj, float):
        return Real(repr(obj), dps)
    if isinstance(obj, str):
        return parse_scalar(obj, dps, exact_decimals=False)
    raise ValueError(f"Not a scalar: {obj!r}")


def format_scalar(x, digits=None):
    """Render a scalar for text output: "num/den" for rationals, decimal for reals."""
    x = as_scalar(x)
    if isinstance(x, Fraction):
        if x.denominator == 1:
            return str(x.numerator)
        return f"{x.numerator}/{x.denominator}"
    return mpmath.nstr(x.value, digits or x.dps)


def _is_exact_pair(obj):
    return (
        isinstance(obj, list)
        and len(obj) == 2
        and all(isinstance(item, str) and _INTEGER_RE.match(item) for item in obj)
    )


def value_to_json(value):
    if isinstance(value, (Fraction, Real)):
        return scalar_to_json(value)
    if isinstance(value, (TaggedSpec, MomentSequence)):
        return value.to_json()
    if isinstance(value, (list, tuple)):
        return [value_to_json(item) for item in value]
    return value


def value_from_json(obj):
    if _is_exact_pair(obj):
        return scalar_from_json(obj)
    if isinstance(obj, list):
        return tuple(value_from_json(item) for item in obj)
    if isinstance(obj, dict) and "values" in obj:
        return MomentSequence.from_json(obj)
    return obj


class TaggedSpec:
    """Base of the tagged variant descriptors, serialized as {"variant": ..., "params": {...}}.

    A direct subclass without a `variant` attribute starts a new family with its own registry;
    subclasses that set `variant` register themselves in that family.
    """

    variant: ClassVar[str]
    _variants: ClassVar[dict]

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        if "variant" in cls.__dict__:
            cls._variants[cls.variant] = cls
        else:
            cls._variants = {}

    @classmethod
    def variants(cls):
        return sorted(cls._variants)

    @classmethod
    def variant_class(cls, name):
        try:
            return cls._variants[name]
        except KeyError:
            raise ValueError(
                f"Unknown {cls.__name__} variant '{name}', expected one of {cls.variants()}"
            ) from None

    def to_json(self):
        params = {f.name: value_to_json(getattr(self, f.name)) for f in fields(self)}
        return {"variant": self.variant, "params": params}

    @classmethod
    def from_json(cls, data):
        if not isinstance(data, dict) or "variant" not in data:
            raise ValueError(f"{cls.__name__} JSON needs a 'variant' key, got {data!r}")
        variant_cls = cls.variant_class(data["variant"])
        params = {key: value_from_json(val) for key, val in data.get("params", {}).items()}
        return variant_cls(**params)


@dataclass(frozen=True)
class Polynomial:
    """Polynomial with ascending coefficients; trailing zeros are trimmed."""

    coeffs: tuple = ()

    def __post_init__(self):
        coeffs = [as_scalar(c) for c in self.coeffs]
        while coeffs and coeffs[-1] == 0:
            coeffs.pop()
        object.__setattr__(self, "coeffs", tuple(coeffs))

    @property
    def degree(self):
        return len(self.coeffs) - 1

    @property
    def is_exact(self):
        return all(is_exact(c) for c in self.coeffs)

    @property
    def leading(self):
        return self.coeffs[-1]

    def __call__(self, x):
        return poly_eval(self, x)

    def __bool__(self):
        return bool(self.coeffs)

    def __str__(self):
        return ",".join(format_scalar(c) for c in self.coeffs)

    @classmethod
    def parse(cls, text):
        """Parse comma-separated ascending coefficients, constant term first ("1,0,1" = x^2+1)."""
        return cls(tuple(parse_scalar(item) for item in text.split(",") if item.strip()))


def poly_eval(p, x):
    """Horner evaluation; exact when both the polynomial and the point are exact."""
    x = as_scalar(x)
    acc = Fraction(0)
    for c in reversed(p.coeffs):
        acc = acc * x + c
    return acc


def elementary_symmetric(values, j):
    values = [as_scalar(v) for v in values]
    if not 0 <= j <= len(values):
        raise ValueError(f"Symmetric function index {j} out of range 0..{len(values)}")

    e = [Fraction(1)] + [Fraction(0)] * j
    for v in values:
        for i in range(j, 0, -1):
            e[i] = e[i] + e[i - 1] * v

    return e[j]


def poly_from_roots(roots):
    """Monic polynomial prod(x - b_i); the coefficient of x^(m-j) is (-1)^j S_j(b)."""
    roots = [as_scalar(r) for r in roots]
    m = len(roots)
    return Polynomial(
        tuple((-1) ** (m - i) * elementary_symmetric(roots, m - i) for i in range(m + 1))
    )


def poly_derivative(p):
    return Polynomial(tuple(i * c for i, c in enumerate(p.coeffs) if i > 0))


def poly_divmod(p, q):
    if not q:
        raise ZeroDivisionError("Polynomial division by the zero polynomial")

    remainder = list(p.coeffs)
    quotient = [Fraction(0)] * max(len(remainder) - len(q.coeffs) + 1, 0)
    lead = q.leading
    for shift in range(len(quotient) - 1, -1, -1):
        factor = remainder[shift + q.degree] / lead
        quotient[shift] = factor
        for i, c in enumerate(q.coeffs):
            remainder[shift + i] = remainder[shift + i] - factor * c
        # the leading term cancels exactly for rationals; force it for reals
        remainder[shift + q.degree] = Fraction(0)

    return Polynomial(tuple(quotient)), Polynomial(tuple(remainder))


def sturm_sequence(p):
    chain = [p, poly_derivative(p)]
    while chain[-1]:
        _, remainder = poly_divmod(chain[-2], chain[-1])
        if not remainder:
            break
        chain.append(Polynomial(tuple(-c for c in remainder.coeffs)))
    if not chain[-1]:
        chain.pop()
    return chain


def _sign_changes(chain, x):
    signs = [s for s in (poly_eval(q, x) for q in chain) if s != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if (a > 0) != (b > 0))


def count_real_roots(p, lo, hi):
    """Number of distinct real roots of an exact polynomial in the closed interval [lo, hi]."""
    if not p.is_exact:
        raise ValueError("Sturm root counting needs exact coefficients")
    if p.degree < 1:
        return 0

    lo, hi = as_scalar(lo), as_scalar(hi)
    chain = sturm_sequence(p)
    count = _sign_changes(chain, lo) - _sign_changes(chain, hi)
    # Sturm counts roots in (lo, hi] when lo is not a root
    if poly_eval(p, lo) == 0:
        count += 1
    return count


def cauchy_root_bound(p):
    """All complex roots of p lie in |x| <= bound."""
    lead = abs(p.leading)
    return 1 + max((abs(c) / lead for c in p.coeffs[:-1]), default=Fraction(0))


def _square(matrix):
    rows = [[as_scalar(x) for x in row] for row in matrix]
    n = len(rows)
    if n == 0 or any(len(row) != n for row in rows):
        raise ValueError(f"Expected a non-empty square matrix, got {n} rows")
    return rows


def _bareiss(rows):
    m = [list(row) for row in rows]
    n = len(m)
    sign = 1
    previous = Fraction(1)
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k] != 0:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return Fraction(0)

        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / previous
        previous = m[k][k]

    return sign * m[n - 1][n - 1]


def determinant(matrix):
    """Determinant of a square matrix.

    Exact rational entries use Bareiss fraction-free elimination. Any real entry switches to
    mpmath LU decomposition with partial pivoting at the largest entry precision.
    """
    rows = _square(matrix)
    dps = common_precision([x for row in rows for x in row])
    if dps is None:
        return _bareiss(rows)

    with mp.workdps(dps):
        value = mp.det(mp.matrix([[to_mpf(x) for x in row] for row in rows]))

    return Real(value, dps)


def solve_linear(matrix, rhs):
    """Solve a square linear system exactly (Gauss-Jordan) or in high precision (mpmath LU)."""
    rows = _square(matrix)
    rhs = [as_scalar(x) for x in rhs]
    n = len(rows)
    if len(rhs) != n:
        raise ValueError(f"Right-hand side has {len(rhs)} entries, matrix has {n} rows")

    dps = common_precision([x for row in rows for x in row] + rhs)
    if dps is not None:
        with mp.workdps(dps):
            a = mp.matrix([[to_mpf(x) for x in row] for row in rows])
            b = mp.matrix([to_mpf(x) for x in rhs])
            try:
                x = mp.lu_solve(a, b)
            except ZeroDivisionError:
                raise ValueError("Linear system is singular") from None
        return [Real(x[i], dps) for i in range(n)]

    a = [list(row) + [b] for row, b in zip(rows, rhs)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            raise ValueError("Linear system is singular")
        a[col], a[pivot] = a[pivot], a[col]

        lead = a[col][col]
        a[col] = [x / lead for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                factor = a[r][col]
                a[r] = [x - factor * y for x, y in zip(a[r], a[col])]

    return [a[r][n] for r in range(n)]


@dataclass(frozen=True)
class MomentSequence:
    """Finite prefix of a sequence with a uniform scalar kind and optional provenance."""

    values: tuple
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(promote(self.values)))
        object.__setattr__(self, "provenance", dict(self.provenance))

    @property
    def kind(self):
        return "real" if self.precision is not None else "exact"

    @property
    def precision(self):
        return common_precision(self.values)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, index):
        return self.values[index]

    def __iter__(self):
        return iter(self.values)

    def to_json(self):
        data = {"kind": self.kind, "values": [scalar_to_json(x) for x in self.values]}
        if self.precision is not None:
            data["precision"] = self.precision
        if self.provenance:
            data["provenance"] = self.provenance
        return data

    @classmethod
    def from_json(cls, data):
        if isinstance(data, list):
            data = {"values": data}
        if not isinstance(data, dict) or "values" not in data:
            raise ValueError("Sequence JSON needs a 'values' list")

        dps = data.get("precision")
        values = tuple(scalar_from_json(item, dps) for item in data["values"])
        return cls(values, data.get("provenance", {}))
