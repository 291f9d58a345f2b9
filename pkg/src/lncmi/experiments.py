"""Experimental protocols: noise sweeps, convergence, sample complexity,
rank stability under subsampling and synergy scans.

Every protocol returns a list of records in canonical order, independent of
the number of worker threads.
"""

import csv
import io
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import synthgen
from .bounds import BoundQuery, ksg_sample_lower_bound
from .dataset import Dataset, deduplicate_jitter, select_complete
from .errors import InsufficientSamples, TruthUnavailable
from .estimators import EstimatorConfig, estimate_mi, resolve_alpha

# a column pair or triple enters a scan only with this many complete rows
MIN_ROWS = 150


def _map(fn, items, threads=1):
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _alpha_for(estimator, cfg, d, table):
    return resolve_alpha(cfg, d, table) if estimator == "lnc" else None


def _cfg_for(estimator, cfg, d, table):
    # pin "auto" to a number once so every cell uses the same threshold
    if estimator != "lnc":
        return cfg
    return EstimatorConfig(cfg.k, _alpha_for(estimator, cfg, d, table), cfg.marginal_convention, cfg.ratio_floor)


@dataclass(frozen=True)
class SweepRecord:
    experiment: str
    estimator: str
    family: str
    sigma: float
    n: int
    k: int
    alpha: float
    seed: int
    estimate: float
    truth: float
    abs_error: float


@dataclass(frozen=True)
class ComplexityRecord:
    I_true: float
    eps: float
    k: int
    d: int
    family: str
    sigma: float
    n_s: int
    lower_bound: float
    trials: int
    censored: bool


@dataclass(frozen=True)
class RankStabilityRecord:
    estimator: str
    rho: float
    repeats: int
    pairs: int
    spearman_mean: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class SynergyRecord:
    estimator: str
    x: str
    y: str
    z: str
    n: int
    multi_info: float
    max_pair: float
    ss: float
    ss_undefined: bool
    interaction: float


def _truth(spec):
    try:
        return synthgen.true_mi(spec).value
    except TruthUnavailable:
        return None


def _sweep_cells(experiment, cells, cfg, table, threads):
    """Evaluate (family, sigma, n, seed, estimator) cells into SweepRecords."""
    truths = {}
    for fam, sigma, n, seed, est in cells:
        if (fam, sigma) not in truths:
            truths[(fam, sigma)] = _truth(synthgen.RelationshipSpec(fam, sigma, n=1))
    cfgs = {}

    def run(cell):
        fam, sigma, n, seed, est = cell
        spec = synthgen.RelationshipSpec(fam, sigma, n=n, seed=seed)
        c = cfgs[(est, spec.d)]
        value = estimate_mi(synthgen.generate(spec), est, c).value
        truth = truths[(fam, sigma)]
        err = None if truth is None else abs(value - truth)
        alpha = c.alpha if est == "lnc" else None
        return SweepRecord(experiment, est, fam, sigma, n, c.k, alpha, seed, value, truth, err)

    # resolve alphas up front so missing table entries fail before any work
    for fam, sigma, n, seed, est in cells:
        d = synthgen.RelationshipSpec(fam, sigma, n=1).d
        if (est, d) not in cfgs:
            cfgs[(est, d)] = _cfg_for(est, cfg, d, table)
    records = _map(run, cells, threads)
    return sorted(records, key=lambda r: (r.family, r.sigma, r.n, r.seed, r.estimator))


def noise_sweep(families, sigmas, n, cfg, estimators, seeds, table=None, threads=1):
    cells = [
        (f, float(s), n, seed, est)
        for f in families for s in sigmas for seed in seeds for est in estimators
    ]
    return _sweep_cells("sweep", cells, cfg, table, threads)


def convergence_run(family, sigma, cfg, n_grid, seeds, estimators=("ksg", "lnc"), table=None, threads=1):
    for n in n_grid:
        if n < cfg.k + 1:
            raise ValueError(f"n={n} is below k+1={cfg.k + 1}")
    cells = [(family, float(sigma), n, seed, est) for n in n_grid for seed in seeds for est in estimators]
    return _sweep_cells("converge", cells, cfg, table, threads)


def _complexity_spec(I_true, n, seed):
    if I_true == 0:
        return synthgen.RelationshipSpec("independent-uniform", 0.0, n=n, seed=seed)
    return synthgen.RelationshipSpec("linear", synthgen.sigma_for_linear_mi(I_true), n=n, seed=seed)


def sample_complexity(I_targets, eps, k=1, trials=10, n_cap=2**18, n_floor=16,
                      estimator="ksg", seed=0, threads=1, table=None):
    """Smallest N whose mean absolute error over ``trials`` seeds is <= eps.

    Doubling from ``n_floor`` brackets N, bisection finds the smallest passing
    value. Targets that still fail at ``n_cap`` are reported censored at n_cap.
    Trial t always uses seed ``seed + t``, so every N sees the same streams.
    """
    if not eps > 0:
        raise ValueError("eps must be > 0")
    n_floor = max(n_floor, k + 2)
    cfg = EstimatorConfig(k, alpha="auto" if estimator == "lnc" else None)
    records = []
    for I in I_targets:
        I = float(I)
        probe = _complexity_spec(I, n_floor, seed)
        c = _cfg_for(estimator, cfg, probe.d, table)

        def mean_error(n, I=I, c=c):
            def one(t):
                spec = _complexity_spec(I, n, seed + t)
                return abs(estimate_mi(synthgen.generate(spec), estimator, c).value - I)

            return math.fsum(_map(one, range(trials), threads)) / trials

        n, censored = n_floor, False
        while mean_error(n) > eps:
            if n >= n_cap:
                censored = True
                break
            n = min(2 * n, n_cap)
        if not censored and n > n_floor:
            lo, hi = max(n // 2, n_floor), n  # lo fails, hi passes
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if mean_error(mid) <= eps:
                    hi = mid
                else:
                    lo = mid
            n = hi
        bound = ksg_sample_lower_bound(BoundQuery(I, eps, probe.d, k))
        records.append(ComplexityRecord(I, eps, k, probe.d, probe.family, probe.noise_sigma,
                                        n, bound, trials, censored))
    return records


def planted_ladder(n=300, n_cols=20, missing_frac=0.1, seed=0):
    """A chain of noisy functional links with a graded ladder of dependence.

    Column j+1 is a fixed nonlinear function of column j plus uniform noise;
    link noise levels cycle through a geometric ladder, so pairs cover a wide
    range of mutual information. A fraction of cells is then masked at random.
    """
    rng = np.random.default_rng(seed)
    shapes = (
        lambda v: v,
        lambda v: 4.0 * (v - 0.5) ** 2,
        lambda v: np.sin(4 * np.pi * v),
        np.sqrt,
        lambda v: 2.0 ** v,
    )
    ladder = np.geomspace(1e-3, 0.3, 7)
    cols = [rng.random(n)]
    for j in range(1, n_cols):
        prev = cols[-1]
        prev = (prev - prev.min()) / (prev.max() - prev.min())
        sigma = ladder[j % len(ladder)]
        cols.append(shapes[j % len(shapes)](prev) + sigma * (rng.random(n) - 0.5))
    values = np.column_stack(cols)
    mask = rng.random(values.shape) >= missing_frac
    names = [f"v{j + 1:02d}" for j in range(n_cols)]
    return Dataset(values, names, mask if not mask.all() else None)


def planted_synergy(n=2000, noise=1e-3, extra=0, seed=0):
    """X, Y ~ U(0,1) and Z = (X + Y) mod 1 + noise, plus ``extra`` independent columns."""
    rng = np.random.default_rng(seed)
    x, y = rng.random(n), rng.random(n)
    z = np.mod(x + y, 1.0) + noise * (rng.random(n) - 0.5)
    cols = [x, y, z] + [rng.random(n) for _ in range(extra)]
    names = ["x", "y", "z"] + [f"e{j + 1}" for j in range(extra)]
    return Dataset(np.column_stack(cols), names)


def _pair_estimates(data, pairs, estimator, cfg, rows_for, threads):
    def run(p):
        view = data.project(p).take_rows(rows_for(p))
        return estimate_mi(view, estimator, cfg).value

    return np.array(_map(run, pairs, threads))


def rank_stability(data, estimator, cfg, fractions, repeats=200, top_m=150, min_rows=MIN_ROWS,
                   jitter=1e-10, seed=0, table=None, threads=1):
    """Spearman agreement between full-data and subsampled MI rankings.

    The ``top_m`` highest-MI column pairs (complete rows only) are ranked on
    the full data; each repeat re-estimates them on a random fraction of
    their rows. Reports the mean and the 2.5/97.5 percentiles over repeats.
    """
    if jitter:
        data = deduplicate_jitter(data, jitter, seed)
    cfg = _cfg_for(estimator, cfg, 2, table)
    rows = {}
    for p in itertools.combinations(range(data.d), 2):
        try:
            rows[p] = np.flatnonzero(select_complete(data, p, min_rows).row_mask)
        except InsufficientSamples:
            pass
    pairs = sorted(rows)
    if len(pairs) < top_m:
        raise InsufficientSamples(len(pairs), top_m)
    full = _pair_estimates(data, pairs, estimator, cfg, rows.get, threads)
    order = sorted(range(len(pairs)), key=lambda i: (-full[i], pairs[i]))[:top_m]
    top = [pairs[i] for i in order]
    ref = full[order]

    records = []
    for fi, rho in enumerate(fractions):
        if not 0 < rho <= 1:
            raise ValueError(f"fraction must lie in (0, 1], got {rho}")
        if rho == 1:
            sub = _pair_estimates(data, top, estimator, cfg, rows.get, threads)
            scores = [synthgen.spearman(ref, sub)] * repeats
        else:
            scores = []
            for r in range(repeats):
                rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(fi, r)))
                picks = {}
                for p in top:
                    all_rows = rows[p]
                    m = max(cfg.k + 2, int(round(rho * all_rows.size)))
                    picks[p] = np.sort(rng.choice(all_rows, size=min(m, all_rows.size), replace=False))
                sub = _pair_estimates(data, top, estimator, cfg, picks.get, threads)
                scores.append(synthgen.spearman(ref, sub))
        s = np.asarray(scores)
        lo, hi = np.percentile(s, [2.5, 97.5])
        records.append(RankStabilityRecord(estimator, float(rho), repeats, top_m,
                                           math.fsum(scores) / len(scores), float(lo), float(hi)))
    return records


def synergy_score(multi_info, max_pair):
    """Return ``(ss, undefined)``; a non-positive denominator gives (+inf, True)."""
    if max_pair <= 0:
        return math.inf, True
    return float(multi_info) / float(max_pair), False


def synergy_scan(data, estimator, cfg, ss_threshold=0.0, pair_threshold=None, min_rows=MIN_ROWS,
                 table=None, threads=1):
    """Synergy scores of every column triple.

    A triple is emitted when SS >= ``ss_threshold`` and, if ``pair_threshold``
    is given, its largest pairwise MI does not exceed it. Sorted by SS
    descending.
    """
    if data.d < 3:
        raise ValueError("synergy scan needs at least 3 columns")
    cfg2 = _cfg_for(estimator, cfg, 2, table)
    cfg3 = _cfg_for(estimator, cfg, 3, table)

    def rows_of(cols):
        return np.flatnonzero(select_complete(data, cols, min_rows).row_mask)

    pairs = list(itertools.combinations(range(data.d), 2))
    pair_mi = dict(zip(pairs, _pair_estimates(data, pairs, estimator, cfg2, rows_of, threads)))

    def run(t):
        view = data.project(t).take_rows(rows_of(t))
        i3 = estimate_mi(view, estimator, cfg3).value
        pm = [pair_mi[p] for p in itertools.combinations(t, 2)]
        ss, undefined = synergy_score(i3, max(pm))
        names = [data.column_names[j] for j in t]
        return SynergyRecord(estimator, *names, view.n, i3, float(max(pm)), ss, undefined,
                             math.fsum(pm) - i3)

    triples = list(itertools.combinations(range(data.d), 3))
    out = [
        r for r in _map(run, triples, threads)
        if r.ss >= ss_threshold and (pair_threshold is None or r.max_pair <= pair_threshold)
    ]
    return sorted(out, key=lambda r: (-r.ss, r.x, r.y, r.z))


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def jsonable(v):
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, dict):
        return {k: jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    return v


def meta_path(path):
    return f"{path}.meta.json"


def render_records(records, fmt="csv", meta=None, record_type=None):
    """Text of a record file; for CSV also the text of its metadata sidecar.

    Returns ``(body, sidecar)``; ``sidecar`` is None for JSON, which embeds
    the metadata next to the records.
    """
    record_type = record_type or (type(records[0]) if records else None)
    header = [f.name for f in fields(record_type)] if record_type else []
    meta = jsonable(meta or {})
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in records:
            w.writerow([_cell(getattr(r, h)) for h in header])
        return buf.getvalue(), json.dumps(meta, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if fmt == "json":
        doc = {"meta": meta, "records": [jsonable(asdict(r)) for r in records]}
        return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n", None
    raise ValueError(f"unknown format {fmt!r}")


def write_records(records, path, fmt="csv", meta=None, record_type=None):
    """Write records as CSV (with a ``.meta.json`` sidecar) or wrapped JSON."""
    body, sidecar = render_records(records, fmt, meta, record_type)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(body)
    if sidecar is not None:
        with open(meta_path(path), "w", encoding="utf-8", newline="") as fh:
            fh.write(sidecar)
