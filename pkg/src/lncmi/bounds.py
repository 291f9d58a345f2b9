"""Sample-size lower bounds for kNN-type MI estimators and the KSG ceiling."""

import logging
import math
from dataclasses import dataclass

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BoundQuery:
    I_true: float
    epsilon: float
    d: int
    k: int = 1

    def __post_init__(self):
        if self.d < 2:
            raise ValueError(f"bounds need d >= 2, got d={self.d}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.k < 1:
            raise ValueError("k must be >= 1")


def _growth(q):
    return math.exp((q.I_true - q.epsilon) / (q.d - 1))


def ksg_sample_lower_bound(q):
    """Minimum N for a KSG estimate to come within epsilon of I_true."""
    c = math.exp(-(q.k - 1) / q.k)
    return c * _growth(q) + 1.0


def knn_sample_lower_bound(q, C_override=None):
    """Same bound for the naive kNN estimator.

    The constant is only known up to order 1/d; 1/d is used unless
    ``C_override`` is given, and the choice is logged.
    """
    if C_override is None:
        c = 1.0 / q.d
        log.info("naive kNN bound: using C = 1/d = %g (order-of-magnitude constant)", c)
    else:
        c = float(C_override)
        log.info("naive kNN bound: using caller-supplied C = %g", c)
    return c * _growth(q) + 1.0


def ksg_estimate_upper_bound(N, k, d):
    """Largest value the KSG estimate can take with N samples."""
    if N < 2:
        raise ValueError("N must be >= 2")
    return (d - 1) * (math.log(N - 1) + (k - 1) / k)
