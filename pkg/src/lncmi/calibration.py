"""Monte Carlo calibration of the LNC nonuniformity threshold alpha(k, d).

A trial draws a random axis-aligned box (side lengths log-uniform on
[1e-2, 1]), places k uniform points in it and records the ratio of the
PCA-aligned rectangle volume to the reference volume, both centered on the
box center. alpha is the ceil(quantile * trials)-th smallest ratio, i.e. the
threshold that a truly uniform neighborhood falls below with probability
``quantile``.

Two reference volumes are supported:

``empirical``
    the centered axis-aligned rectangle of the sampled points, the same
    quantity the estimator compares against at runtime (default);
``generating``
    the volume of the box the points were drawn from.
"""

import csv
import functools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import AlphaUnavailable, TableVersionMismatch
from .localgeom import CONVENTION, pca_extents

DEFAULT_TRIALS = 500_000
DEFAULT_QUANTILE = 5e-3
V_MODES = ("empirical", "generating")
SIDE_RANGE_LOG10 = (-2.0, 0.0)
BLOCK = 4096
TABLE_HEADER = ("d", "k", "alpha", "trials", "quantile", "seed", "convention")
ENV_TABLE = "LNCMI_ALPHA_TABLE"


def _trial_ratios(k, d, rng, count, v_mode="empirical"):
    sides = 10.0 ** rng.uniform(*SIDE_RANGE_LOG10, size=(count, d))
    pts = (rng.random((count, k, d)) - 0.5) * sides[:, None, :]
    v_bar = np.prod(pca_extents(pts), axis=1)
    if v_mode == "empirical":
        v_ref = np.prod(2.0 * np.abs(pts).max(axis=1), axis=1)
    else:
        v_ref = np.prod(sides, axis=1)
    return v_bar / v_ref


def calibration_trial(k, d, rng, v_mode="empirical"):
    """Volume ratio of one uniform-box trial drawn from ``rng``."""
    if d < 2 or k < 1:
        raise ValueError(f"need d >= 2 and k >= 1, got k={k}, d={d}")
    return float(_trial_ratios(k, d, rng, 1, v_mode)[0])


def _block_rng(seed, block):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def trial_ratios(k, d, trials, seed, v_mode="empirical", threads=1):
    """Ratios for trials 0..trials-1; identical for any ``threads``.

    Trials are grouped in fixed blocks of BLOCK, block b drawing from a stream
    keyed on (seed, b), so the output does not depend on scheduling.
    """
    if v_mode not in V_MODES:
        raise ValueError(f"v_mode must be one of {V_MODES}")
    nblocks = -(-trials // BLOCK)

    def run(b):
        count = min(BLOCK, trials - b * BLOCK)
        return _trial_ratios(k, d, _block_rng(seed, b), count, v_mode)

    if threads > 1 and nblocks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(nblocks)))
    else:
        parts = [run(b) for b in range(nblocks)]
    return np.concatenate(parts)


def quantile_rank(trials, quantile):
    # ceil(quantile * trials) without float residue pushing it one too high
    return max(1, math.ceil(round(quantile * trials, 9)))


def estimate_alpha(k, d, trials=DEFAULT_TRIALS, quantile=DEFAULT_QUANTILE, seed=0,
                   v_mode="empirical", threads=1):
    if d < 2:
        raise ValueError("alpha is only defined for d >= 2 (the ratio is 1 in one dimension)")
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 < quantile < 1:
        raise ValueError("quantile must lie in (0, 1)")
    if trials * quantile < 1:
        raise ValueError("trials must be at least 1/quantile")
    ratios = trial_ratios(k, d, trials, seed, v_mode, threads)
    r = quantile_rank(trials, quantile)
    return float(np.partition(ratios, r - 1)[r - 1])


@dataclass(frozen=True)
class AlphaEntry:
    alpha: float
    trials: int
    quantile: float
    seed: int
    convention: str


def convention_tag(v_mode):
    return f"{CONVENTION}/{v_mode}"


class AlphaTable:
    """Calibrated thresholds keyed by (k, d), with per-entry provenance."""

    def __init__(self, entries=None):
        entries = dict(entries or {})
        for (k, d), e in entries.items():
            if d < 2:
                raise ValueError(f"alpha entries need d >= 2, got d={d}")
            if not 0.0 <= e.alpha:
                raise ValueError(f"negative alpha for k={k}, d={d}")
        self._entries = dict(sorted(entries.items(), key=lambda kv: (kv[0][1], kv[0][0])))

    def __len__(self):
        return len(self._entries)

    def __contains__(self, key):
        return key in self._entries

    def __eq__(self, other):
        return isinstance(other, AlphaTable) and self._entries == other._entries

    def items(self):
        return self._entries.items()

    def entry(self, k, d):
        try:
            return self._entries[(k, d)]
        except KeyError:
            raise AlphaUnavailable(k, d) from None

    def lookup(self, k, d):
        return self.entry(k, d).alpha

    def with_entry(self, k, d, entry):
        entries = dict(self._entries)
        entries[(k, d)] = entry
        return AlphaTable(entries)

    def save(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TABLE_HEADER)
            for (k, d), e in self._entries.items():
                w.writerow([d, k, repr(e.alpha), e.trials, repr(e.quantile), e.seed, e.convention])

    @classmethod
    def load(cls, path):
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows or tuple(rows[0]) != TABLE_HEADER:
            raise TableVersionMismatch(f"{path}: expected header {','.join(TABLE_HEADER)}")
        entries = {}
        for row in rows[1:]:
            if not row:
                continue
            d, k, alpha, trials, quantile, seed, conv = row
            if conv.split("/")[0] != CONVENTION:
                raise TableVersionMismatch(
                    f"{path}: entry k={k}, d={d} was calibrated with geometry {conv!r}, "
                    f"this build uses {CONVENTION!r}; recalibrate"
                )
            entries[(int(k), int(d))] = AlphaEntry(float(alpha), int(trials), float(quantile), int(seed), conv)
        return cls(entries)


def calibrate_table(dims, k_max=20, trials=DEFAULT_TRIALS, quantile=DEFAULT_QUANTILE, seed=0,
                    v_mode="empirical", threads=1, progress=None):
    """Table over every d in ``dims`` and k in [d, k_max]."""
    entries = {}
    for d in dims:
        for k in range(d, k_max + 1):
            a = estimate_alpha(k, d, trials, quantile, seed, v_mode, threads)
            entries[(k, d)] = AlphaEntry(a, trials, quantile, seed, convention_tag(v_mode))
            if progress:
                progress(k, d, a)
    return AlphaTable(entries)


def shipped_table_path():
    return resources.files("lncmi").joinpath("data", "alpha_table.csv")


@functools.lru_cache(maxsize=8)
def _load_cached(path):
    return AlphaTable.load(path)


def default_table():
    """The table named by $LNCMI_ALPHA_TABLE, else the one bundled with the package."""
    path = os.environ.get(ENV_TABLE) or str(shipped_table_path())
    return _load_cached(path)
