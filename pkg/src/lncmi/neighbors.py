"""Exact k-nearest-neighbor queries and marginal range counts.

Neighbor lists are ordered by distance, ties broken by the smaller point
index, and never contain the query point itself. Distances are recomputed
with numpy after the tree lookup so that the reported values do not depend
on the tree's internal arithmetic.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .dataset import as_values
from .errors import ZeroDistance

METRICS = {"max": np.inf, "euclidean": 2}
LEAF_SIZE = 64
_EXTRA = 3
_REL_GUARD = 1e-9


def pair_distances(diffs, metric):
    if metric == "max":
        return np.abs(diffs).max(axis=-1)
    return np.sqrt(np.square(diffs).sum(axis=-1))


@dataclass(frozen=True)
class NeighborhoodInfo:
    center: int
    neighbors: np.ndarray      # k indices, ascending distance
    eps_max: float             # twice the max-norm distance to the k-th neighbor
    axis_extents: np.ndarray   # per-axis side lengths of the centered rectangle
    marginal_counts: np.ndarray = None


class SpatialIndex:
    """Immutable search structure over an n x d sample matrix."""

    def __init__(self, data, metric="max"):
        if metric not in METRICS:
            raise ValueError(f"metric must be one of {sorted(METRICS)}")
        values = np.array(as_values(data), dtype=float)
        values.setflags(write=False)
        self.values = values
        self.metric = metric
        self._p = METRICS[metric]
        self._tree = cKDTree(values, leafsize=LEAF_SIZE)

    @property
    def n(self):
        return self.values.shape[0]

    def query(self, k, points=None):
        """k nearest neighbors of the given points (all points by default).

        Returns ``(dist, idx)`` arrays of shape (m, k).
        """
        n = self.n
        if not 1 <= k <= n - 1:
            raise ValueError(f"need 1 <= k <= n-1, got k={k}, n={n}")
        pts = np.arange(n) if points is None else np.atleast_1d(np.asarray(points, dtype=np.intp))
        m = min(k + 1 + _EXTRA, n)
        tree_d, cand = self._tree.query(self.values[pts], k=m, p=self._p)
        tree_d = tree_d.reshape(len(pts), m)
        cand = cand.reshape(len(pts), m)

        is_self = cand == pts[:, None]
        has_self = is_self.any(axis=1)
        # drop self; rows where duplicates pushed self out drop the last column
        drop = np.where(has_self, np.argmax(is_self, axis=1), m - 1)
        keep = np.ones_like(cand, dtype=bool)
        keep[np.arange(len(pts)), drop] = False
        cand = cand[keep].reshape(len(pts), m - 1)

        dist = pair_distances(self.values[cand] - self.values[pts][:, None, :], self.metric)
        order = np.lexsort((cand, dist), axis=1)
        cand = np.take_along_axis(cand, order, axis=1)
        dist = np.take_along_axis(dist, order, axis=1)

        # the retrieved candidates provably contain the true k-set unless the
        # k-th distance reaches the last retrieved one (or self was not returned)
        if m == n:
            safe = np.ones(len(pts), dtype=bool)
        else:
            safe = dist[:, k - 1] < tree_d[:, -1] * (1.0 - _REL_GUARD)
        safe &= has_self
        out_idx = cand[:, :k].copy()
        out_dist = dist[:, :k].copy()
        for r in np.flatnonzero(~safe):
            out_dist[r], out_idx[r] = self._brute(int(pts[r]), k)
        return out_dist, out_idx

    def _brute(self, i, k):
        dist = pair_distances(self.values - self.values[i], self.metric)
        dist[i] = np.inf
        order = np.lexsort((np.arange(self.n), dist))[:k]
        return dist[order], order


def neighborhoods(index, k):
    """Batch neighbor data for every point.

    Returns ``(idx, eps_max, axis_extents)`` with shapes (n, k), (n,), (n, d).
    Raises ZeroDistance on the first point whose k-th neighbor is a duplicate.
    """
    dist, idx = index.query(k)
    zero = np.flatnonzero(dist[:, k - 1] == 0)
    if zero.size:
        raise ZeroDistance(int(zero[0]), k)
    offsets = index.values[idx] - index.values[:, None, :]
    axis_extents = 2.0 * np.abs(offsets).max(axis=1)
    if index.metric == "max":
        eps_max = 2.0 * dist[:, k - 1]
    else:
        eps_max = axis_extents.max(axis=1)
    return idx, eps_max, axis_extents


def knn(index, i, k):
    """Neighborhood of point ``i`` under the index's metric."""
    dist, idx = index.query(k, points=[i])
    if dist[0, k - 1] == 0:
        raise ZeroDistance(int(i), k)
    offsets = index.values[idx[0]] - index.values[i]
    extents = 2.0 * np.abs(offsets).max(axis=0)
    if index.metric == "max":
        eps = 2.0 * float(dist[0, k - 1])
    else:
        eps = float(extents.max())
    vals = index.values
    counts = np.array([
        np.count_nonzero(np.abs(vals[:, j] - vals[i, j]) <= extents[j] / 2.0) - 1
        for j in range(vals.shape[1])
    ])
    return NeighborhoodInfo(int(i), idx[0], eps, extents, counts)


def knn_euclidean_radius(index, i, k):
    if index.metric != "euclidean":
        raise ValueError("knn_euclidean_radius needs an index built with metric='euclidean'")
    dist, _ = index.query(k, points=[i])
    r = float(dist[0, k - 1])
    if r == 0:
        raise ZeroDistance(int(i), k)
    return r


def _first_true(pred, lo, hi):
    # vectorized lower_bound: smallest u in [lo, hi) with pred(u) true, hi if none;
    # pred must be monotone (False...False True...True) along u
    lo = lo.copy()
    hi = hi.copy()
    while True:
        active = lo < hi
        if not active.any():
            return lo
        mid = (lo + hi) // 2
        p = pred(np.where(active, mid, 0))
        hi = np.where(active & p, mid, hi)
        lo = np.where(active & ~p, mid + 1, lo)


def marginal_counts(column, half_widths, strict=False):
    """Per-point count of other points within ``half_widths`` along one axis.

    ``|x_l - x_i| <= h_i`` (or ``<`` with ``strict``), center excluded. The
    comparison uses the same floating-point differences a direct scan would,
    so boundary points are classified identically to a linear scan.
    """
    x = np.asarray(column, dtype=float)
    h = np.asarray(half_widths, dtype=float)
    n = x.shape[0]
    s = np.sort(x)
    zeros = np.zeros(n, dtype=np.intp)
    full = np.full(n, n, dtype=np.intp)
    if strict:
        # first index whose (x - s) is < h, and first whose (s - x) is >= h
        lo = _first_true(lambda u: (x - s[u]) < h, zeros, full)
        hi = _first_true(lambda u: (s[u] - x) >= h, zeros, full)
        # the center itself lies inside exactly when h > 0
        return np.where(h > 0, hi - lo - 1, 0)
    lo = _first_true(lambda u: (x - s[u]) <= h, zeros, full)
    hi = _first_true(lambda u: (s[u] - x) > h, zeros, full)
    return hi - lo - 1


def marginal_count(data, i, j, half_width):
    """Number of points other than ``i`` within ``half_width`` of it on axis ``j``."""
    if half_width < 0:
        raise ValueError("half_width must be >= 0")
    values = as_values(data)
    col = values[:, j]
    return int(np.count_nonzero(np.abs(col - col[i]) <= half_width) - 1)
