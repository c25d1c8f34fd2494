from fractions import Fraction

from momentlab.measures import (
    BetaWeight,
    CatalanArc,
    ExponentialWeight,
    FiniteAtomic,
    GammaWeight,
    GaussianWeight,
    LogWeight,
    Poisson,
    Uniform,
)
from momentlab.sequences import (
    Bell,
    BellShift,
    BetaRatio,
    Catalan,
    Factorial,
    FibAveraged,
    FibShift,
    GaussianAbs,
    InversePowers,
    Powers,
    RisingFactorial,
    Touchard,
)

# positive moment sequence families, with whether their measure lives on [0, inf)
PM_FAMILIES = [
    (Powers(2), True),
    (Factorial(), True),
    (GaussianAbs(), True),
    (Catalan(), True),
    (InversePowers(0), True),
    (InversePowers(2), True),
    (RisingFactorial(Fraction(1, 2)), True),
    (RisingFactorial(0), True),
    (BetaRatio(2, 3), True),
    (FibShift(1), False),
    (FibShift(5), False),
    (FibAveraged("fib-over-index"), False),
    (FibAveraged("even-fib-over-index"), True),
    (Touchard(1), True),
    (Touchard(Fraction(1, 2)), True),
    (Bell(), True),
    (BellShift(), True),
]

MEASURES = [
    (Uniform(), True),
    (Uniform(-1, 1), False),
    (ExponentialWeight(), True),
    (GaussianWeight(), False),
    (GammaWeight(Fraction(1, 2)), True),
    (BetaWeight(2, 3), True),
    (BetaWeight(Fraction(1, 2), Fraction(1, 2)), True),
    (CatalanArc(), True),
    (LogWeight(1), True),
    (LogWeight(Fraction(1, 2)), True),
    (Poisson(1), True),
    (Poisson(3), True),
    (FiniteAtomic(((-1, 1), (2, 3))), False),
]
