"""Local neighborhood volumes: the axis-aligned rectangle and its PCA-rotated
counterpart.

Both rectangles are centered on the query point. Along every axis the side
length is twice the largest absolute neighbor offset, so in one dimension the
two volumes coincide.
"""

from dataclasses import dataclass

import numpy as np

from .dataset import as_values
from .errors import DegenerateAxis
from .mathcore import eigh_batch

# Bumped whenever the geometry below changes; alpha tables record it.
CONVENTION = "centered-2max-v1"

# PCA extents below this fraction of the largest extent are treated as exactly
# zero (rounding residue of rank-deficient neighborhoods).
RANK_TOL = 1e-12


@dataclass(frozen=True)
class LocalVolumes:
    v_axis: np.ndarray
    v_pca: np.ndarray
    ratio: np.ndarray
    rank_deficient: np.ndarray


def axis_rect_volume(nbhd):
    ext = np.asarray(nbhd.axis_extents, dtype=float)
    zero = np.flatnonzero(ext == 0)
    if zero.size:
        raise DegenerateAxis(int(zero[0]), nbhd.center)
    return float(np.prod(ext))


def pca_extents(offsets):
    """PCA-frame rectangle side lengths for stacks of neighbor offsets.

    ``offsets`` has shape (..., k, d) and holds neighbor minus center. The
    second-moment matrix is taken about the center, not the neighbor mean.
    Returns side lengths of shape (..., d).
    """
    offsets = np.asarray(offsets, dtype=float)
    k = offsets.shape[-2]
    moment = np.einsum("...ki,...kj->...ij", offsets, offsets) / k
    _, basis = eigh_batch(moment)
    coords = np.einsum("...ki,...ij->...kj", offsets, basis)
    ext = 2.0 * np.abs(coords).max(axis=-2)
    top = ext.max(axis=-1, keepdims=True)
    return np.where(ext <= RANK_TOL * top, 0.0, ext)


def pca_rect_volume(data, nbhd):
    """Volume of the PCA-aligned rectangle around ``nbhd.center``.

    Returns ``(v_pca, rank_deficient)``; a rank-deficient neighborhood has a
    zero side and zero volume.
    """
    values = as_values(data)
    offsets = values[np.asarray(nbhd.neighbors)] - values[nbhd.center]
    ext = pca_extents(offsets)
    v = float(np.prod(ext))
    return v, bool(np.any(ext == 0))


def local_volumes(values, neighbor_idx, axis_extents=None):
    """Vectorized V(i), V-bar(i) and their ratio for every point.

    ``axis_extents`` may be passed when already known from the neighbor search.
    Raises DegenerateAxis if some axis-aligned rectangle has a zero side.
    """
    values = np.asarray(values, dtype=float)
    offsets = values[neighbor_idx] - values[:, None, :]
    if axis_extents is None:
        axis_extents = 2.0 * np.abs(offsets).max(axis=1)
    flat = np.argwhere(axis_extents == 0)
    if flat.size:
        raise DegenerateAxis(int(flat[0, 1]), int(flat[0, 0]))
    v_axis = np.prod(axis_extents, axis=1)
    ext = pca_extents(offsets)
    v_pca = np.prod(ext, axis=1)
    return LocalVolumes(
        v_axis=v_axis,
        v_pca=v_pca,
        ratio=v_pca / v_axis,
        rank_deficient=np.any(ext == 0, axis=1),
    )
