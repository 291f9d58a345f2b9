"""kNN entropy and mutual-information estimators.

All values are in nats. Per-point terms are reduced with ``math.fsum`` so the
result is independent of sample order and worker count.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import neighbors as nb
from .dataset import as_values
from .errors import DimensionTooSmall
from .localgeom import local_volumes
from .mathcore import digamma, gamma_k, unit_ball_volume_coeff

CONVENTIONS = ("final", "draft")


def _mean(terms):
    terms = np.asarray(terms, dtype=float).ravel()
    return math.fsum(terms.tolist()) / terms.size


@dataclass(frozen=True)
class EstimatorConfig:
    """Parameters shared by the KSG and LNC estimators.

    ``alpha`` is a float threshold, ``"auto"`` (look up the calibrated table)
    or None (allowed for KSG only). ``marginal_convention="draft"`` selects the
    older KSG form: strict counts within the joint max-norm half-width, psi(n+1)
    and no (d-1)/k term.
    """

    k: int
    alpha: object = "auto"
    marginal_convention: str = "final"
    ratio_floor: float = 1e-15

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")
        if self.marginal_convention not in CONVENTIONS:
            raise ValueError(f"marginal_convention must be one of {CONVENTIONS}")
        if not self.ratio_floor > 0:
            raise ValueError("ratio_floor must be > 0")
        a = self.alpha
        if a is not None and a != "auto":
            if not 0.0 <= float(a) <= 1.0:
                raise ValueError(f"alpha must lie in [0, 1], got {a!r}")


@dataclass(frozen=True)
class MIEstimate:
    value: float
    per_point_corrections: np.ndarray = None
    corrected_fraction: float = 0.0
    floored_count: int = 0

    def __float__(self):
        return self.value


def _check_n(values, k):
    n = values.shape[0]
    if not 1 <= k <= n - 1:
        raise ValueError(f"need 1 <= k <= n-1, got k={k}, n={n}")


def _log_knn_density(values, k):
    # log p_hat_k at every sample, Euclidean k-NN ball
    n, d = values.shape
    index = nb.SpatialIndex(values, metric="euclidean")
    dist, _ = index.query(k)
    r = dist[:, k - 1]
    zero = np.flatnonzero(r == 0)
    if zero.size:
        raise nb.ZeroDistance(int(zero[0]), k)
    return math.log(k / (n - 1)) - math.log(unit_ball_volume_coeff(d)) - d * np.log(r)


def entropy_knn_naive(data, k, bias_corrected=True):
    values = as_values(data)
    _check_n(values, k)
    h = -_mean(_log_knn_density(values, k))
    if bias_corrected:
        h -= gamma_k(k)
    return h


def mi_knn_naive(data, k):
    values = as_values(data)
    n, d = values.shape
    if d < 2:
        raise DimensionTooSmall(d)
    _check_n(values, k)
    terms = _log_knn_density(values, k)
    for j in range(d):
        terms = terms - _log_knn_density(values[:, j : j + 1], k)
    return MIEstimate(value=_mean(terms) - (d - 1) * gamma_k(k))


def entropy_ksg(data, k):
    values = as_values(data)
    n, d = values.shape
    _check_n(values, k)
    _, eps, _ = nb.neighborhoods(nb.SpatialIndex(values, "max"), k)
    return digamma(float(n)) - digamma(float(k)) + d * _mean(np.log(eps))


def _ksg(values, k, convention):
    """KSG value plus the neighbor data LNC reuses."""
    n, d = values.shape
    idx, eps, extents = nb.neighborhoods(nb.SpatialIndex(values, "max"), k)
    if convention == "final":
        counts = np.stack(
            [nb.marginal_counts(values[:, j], extents[:, j] / 2.0) for j in range(d)],
            axis=1,
        )
        psi_sum = digamma(counts.astype(float)).sum(axis=1)
        value = (d - 1) * digamma(float(n)) + digamma(float(k)) - (d - 1) / k - _mean(psi_sum)
    else:
        counts = np.stack(
            [nb.marginal_counts(values[:, j], eps / 2.0, strict=True) for j in range(d)],
            axis=1,
        )
        psi_sum = digamma(counts + 1.0).sum(axis=1)
        value = (d - 1) * digamma(float(n)) + digamma(float(k)) - _mean(psi_sum)
    return value, idx, extents


def mi_ksg(data, cfg):
    values = as_values(data)
    d = values.shape[1]
    if d < 2:
        raise DimensionTooSmall(d)
    _check_n(values, cfg.k)
    value, _, _ = _ksg(values, cfg.k, cfg.marginal_convention)
    return MIEstimate(value=value)


def resolve_alpha(cfg, d, table=None):
    """Numeric alpha for ``cfg`` at dimension ``d``, consulting ``table`` for "auto"."""
    if cfg.alpha is None:
        raise ValueError("LNC needs an alpha threshold")
    if cfg.alpha == "auto":
        if table is None:
            from .calibration import default_table

            table = default_table()
        return table.lookup(cfg.k, d)
    return float(cfg.alpha)


def lnc_corrections(volumes, alpha, ratio_floor):
    """Per-point log volume ratios that pass the nonuniformity test.

    Returns ``(corrections, floored_count)``; points whose ratio is not below
    ``alpha`` contribute 0.
    """
    ratio = volumes.ratio
    hit = ratio < alpha
    floored = hit & (ratio < ratio_floor)
    safe = np.where(hit, np.maximum(ratio, ratio_floor), 1.0)
    return np.where(hit, np.log(safe), 0.0), int(floored.sum())


def mi_lnc(data, cfg, table=None):
    """KSG estimate with the local nonuniformity correction.

    Each point whose PCA-to-axis volume ratio falls below alpha contributes
    log(ratio) to a correction that is subtracted from the KSG value, so the
    result never falls below KSG.
    """
    values = as_values(data)
    n, d = values.shape
    if d < 2:
        raise DimensionTooSmall(d)
    _check_n(values, cfg.k)
    alpha = resolve_alpha(cfg, d, table)
    ksg, idx, extents = _ksg(values, cfg.k, cfg.marginal_convention)
    vols = local_volumes(values, idx, extents)
    corr, floored = lnc_corrections(vols, alpha, cfg.ratio_floor)
    fraction = float(np.count_nonzero(corr)) / n
    return MIEstimate(
        value=ksg - _mean(corr),
        per_point_corrections=corr,
        corrected_fraction=fraction,
        floored_count=floored,
    )


def mi_generic_ratio(joint_mass, joint_volume, marginal_mass, marginal_volume, corrected_volume=None):
    """Mean log of the joint-to-product density ratio built from masses and volumes.

    Joint densities are ``joint_mass / V`` with ``V = corrected_volume`` when
    given (else ``joint_volume``); marginal densities are
    ``marginal_mass / marginal_volume`` per axis. Swapping in a corrected
    volume shifts the result by exactly ``-mean(log(V_bar / V))``.
    """
    jm = np.asarray(joint_mass, dtype=float)
    jv = np.asarray(joint_volume if corrected_volume is None else corrected_volume, dtype=float)
    mm = np.asarray(marginal_mass, dtype=float)
    mv = np.asarray(marginal_volume, dtype=float)
    if mm.ndim == 1:
        mm = mm[:, None]
        mv = mv[:, None]
    if np.any(jv <= 0) or np.any(mv <= 0) or np.any(np.asarray(joint_volume) <= 0):
        raise ValueError("volumes must be positive")
    if np.any(jm <= 0) or np.any(mm <= 0):
        raise ValueError("probability masses must be positive")
    terms = np.log(jm) - np.log(jv) - (np.log(mm) - np.log(mv)).sum(axis=1)
    return _mean(terms)


ESTIMATORS = ("knn", "ksg", "lnc")


def estimate_mi(data, estimator, cfg, table=None):
    """Dispatch to one of the MI estimators by name."""
    if estimator == "ksg":
        return mi_ksg(data, cfg)
    if estimator == "lnc":
        return mi_lnc(data, cfg, table)
    if estimator == "knn":
        return mi_knn_naive(data, cfg.k)
    raise ValueError(f"unknown estimator {estimator!r}; choose from {ESTIMATORS}")
