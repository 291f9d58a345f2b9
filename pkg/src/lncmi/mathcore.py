"""Special functions and small symmetric eigenproblems."""

import math
from dataclasses import dataclass

import numpy as np

EULER_GAMMA = 0.57721566490153286061

# Bernoulli-number coefficients B_2n / (2n) of the digamma asymptotic series.
_ASYMPTOTIC = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)
_SHIFT_TO = 10.0


def _digamma_series(x):
    # used for x >= 10, where the truncation error is below 1e-16
    inv2 = 1.0 / (x * x)
    poly = 0.0
    for c in reversed(_ASYMPTOTIC):
        poly = poly * inv2 + c
    return np.log(x) - 0.5 / x - poly * inv2


def digamma(x):
    """Digamma function for positive arguments.

    Accepts a scalar or an array. Arguments below 10 are shifted upward with
    psi(x) = psi(x + 1) - 1/x before the asymptotic series is applied.
    """
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("digamma is only defined here for x > 0")
    acc = np.zeros_like(x)
    y = x.copy()
    while True:
        low = y < _SHIFT_TO
        if not low.any():
            break
        acc = np.where(low, acc - 1.0 / np.where(low, y, 1.0), acc)
        y = np.where(low, y + 1.0, y)
    out = _digamma_series(y) + acc
    return float(out) if scalar else out


def gamma_k(k):
    """Bias offset psi(k) - ln k of the naive kNN entropy estimator."""
    if k < 1 or int(k) != k:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    return digamma(float(k)) - math.log(k)


def unit_ball_volume_coeff(d):
    """Volume of the unit Euclidean ball in ``d`` dimensions."""
    if d < 1:
        raise ValueError("d must be >= 1")
    return math.exp(0.5 * d * math.log(math.pi) - math.lgamma(0.5 * d + 1.0))


@dataclass(frozen=True)
class SymmetricEigenResult:
    eigenvalues: np.ndarray   # descending
    eigenvectors: np.ndarray  # columns, orthonormal


def _fix_signs(vecs):
    # make the largest-magnitude component of every column positive
    pivot = np.argmax(np.abs(vecs), axis=-2)
    comp = np.take_along_axis(vecs, pivot[..., None, :], axis=-2)
    return vecs * np.where(comp < 0, -1.0, 1.0)


def eigh_batch(mats):
    """Descending eigendecomposition of a stack of symmetric matrices.

    No symmetry validation; callers build ``mats`` symmetric by construction.
    """
    w, v = np.linalg.eigh(mats)
    return w[..., ::-1], _fix_signs(v[..., ::-1])


def eigh(a):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    w, v = eigh_batch(0.5 * (a + a.T))
    return SymmetricEigenResult(eigenvalues=w, eigenvectors=v)
