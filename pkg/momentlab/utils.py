import logging
import os
from contextlib import contextmanager
from contextvars import ContextVar

DEFAULT_PRECISION = 60
MIN_PRECISION = 10
PRECISION_ENV_VAR = "MOMENTLAB_PRECISION"

# extra decimal digits carried by quadrature and Poisson summation
QUADRATURE_GUARD_DIGITS = 20

CHEBYSHEV_NODES = 1024

# tanh-sinh refinement levels tried before a quadrature is declared non-convergent
QUADRATURE_MAX_DEGREE = 10

COROLLARY_X_RANGE = (-50, 50)
COROLLARY_SAMPLES = 4001

LOG_FORMAT = "%(asctime)s %(levelname)s: %(message)s"
LOG_DATEFMT = "%Y-%m-%d %H:%M:%S"

_scoped_precision = ContextVar("momentlab_precision", default=None)


class MomentLabError(Exception):
    """Base class for domain errors raised by momentlab."""


class InsufficientLengthError(MomentLabError, ValueError):
    pass


class SingularDivisorError(MomentLabError, ZeroDivisionError):
    pass


class QuadratureError(MomentLabError, ArithmeticError):
    pass


def get_precision(dps=None):
    """Resolve the working precision in decimal digits.

    Args:
        dps (int, optional): explicit precision; when None the innermost precision_scope() wins,
            then the MOMENTLAB_PRECISION environment variable, then DEFAULT_PRECISION

    Returns:
        int: precision in decimal digits, at least MIN_PRECISION
    """
    if dps is None:
        dps = _scoped_precision.get()
    if dps is None:
        env_value = os.environ.get(PRECISION_ENV_VAR)
        if env_value is None:
            return DEFAULT_PRECISION
        try:
            dps = int(env_value)
        except ValueError:
            raise ValueError(f"{PRECISION_ENV_VAR} must be an integer, got '{env_value}'") from None

    if dps < MIN_PRECISION:
        raise ValueError(f"Precision must be at least {MIN_PRECISION} digits, got {dps}")

    return int(dps)


@contextmanager
def precision_scope(dps):
    """Make dps the default precision of get_precision() inside the block.

    The override lives in a context variable, so threads and asyncio tasks keep their own.
    """
    token = _scoped_precision.set(get_precision(dps))
    try:
        yield
    finally:
        _scoped_precision.reset(token)


def setup_logging(level=logging.INFO, stream=None):
    handler = logging.StreamHandler(stream)
    handler.setFormatter(logging.Formatter(fmt=LOG_FORMAT, datefmt=LOG_DATEFMT))

    logger = logging.getLogger("momentlab")
    logger.handlers.clear()
    logger.setLevel(level)
    logger.addHandler(handler)

    return logger


def require_length(seq, needed, what="sequence"):
    if len(seq) < needed:
        raise InsufficientLengthError(f"{what} has {len(seq)} entries, at least {needed} needed")
