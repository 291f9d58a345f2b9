"""Command-line interface.

Exit codes: 0 success, 1 usage or argument error, 2 data error, 3 no
calibrated alpha for the requested (k, d).
"""

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, fields, replace
from decimal import Decimal, InvalidOperation

from . import __version__, calibration, experiments, synthgen
from .dataset import deduplicate_jitter, ingest_csv, select_complete
from .errors import AlphaUnavailable, DataError
from .estimators import CONVENTIONS, ESTIMATORS, EstimatorConfig, estimate_mi
from .localgeom import CONVENTION

EXIT_USAGE, EXIT_DATA, EXIT_ALPHA = 1, 2, 3
JITTER_REL = 1e-10
# record fields holding information quantities, rescaled by --bits
INFO_FIELDS = frozenset({"estimate", "truth", "abs_error", "multi_info", "max_pair", "interaction", "I_true", "eps"})


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _decimal(text):
    try:
        return Decimal(text.strip())
    except InvalidOperation:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def float_list(text):
    """Comma list of floats; ``a..b`` expands to decades from a to b."""
    out = []
    for part in text.split(","):
        if ".." in part:
            a, b = (_decimal(x) for x in part.split("..", 1))
            if a <= 0 or b <= 0:
                raise argparse.ArgumentTypeError(f"decade range needs positive ends: {part!r}")
            span = (b / a).log10()
            steps = int(span.to_integral_value())
            if span != steps:
                raise argparse.ArgumentTypeError(f"{part!r} is not a whole number of decades")
            sign = 1 if steps >= 0 else -1
            out.extend(float(a.scaleb(sign * i)) for i in range(abs(steps) + 1))
        else:
            out.append(float(_decimal(part)))
    return out


def int_list(text):
    """Comma list of ints; ``a..b`` expands to a, 2a, 4a, ... up to b."""
    out = []
    for part in text.split(","):
        try:
            if ".." in part:
                a, b = (int(x) for x in part.split("..", 1))
                if a < 1 or b < a:
                    raise ValueError
                while a <= b:
                    out.append(a)
                    a *= 2
            else:
                out.append(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None
    return out


def name_list(choices=None):
    def parse(text):
        items = [t.strip() for t in text.split(",") if t.strip()]
        if not items:
            raise argparse.ArgumentTypeError("empty list")
        if choices is not None:
            bad = [t for t in items if t not in choices]
            if bad:
                raise argparse.ArgumentTypeError(f"invalid choice {bad[0]!r} (choose from {', '.join(choices)})")
        return items

    return parse


def alpha_arg(text):
    if text == "calibrate":
        return text
    try:
        a = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("alpha must be a number in [0, 1] or 'calibrate'") from None
    if not 0.0 <= a <= 1.0:
        raise argparse.ArgumentTypeError("alpha must lie in [0, 1]")
    return a


def positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=positive_int, default=1)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--alpha", type=alpha_arg,
                        help="LNC threshold: a number, or 'calibrate' to estimate it now (default: table lookup)")
    common.add_argument("--alpha-table", help=f"alpha table CSV (default: ${calibration.ENV_TABLE} or the bundled table)")
    common.add_argument("--calib-trials", type=positive_int, default=calibration.DEFAULT_TRIALS,
                        help="trials for --alpha calibrate")
    common.add_argument("--convention", choices=CONVENTIONS, default="final",
                        help="KSG marginal counting convention")
    common.add_argument("--bits", action="store_true", help="report information in bits instead of nats")
    common.add_argument("--jitter", action=argparse.BooleanOptionalAction, default=True,
                        help=f"add relative jitter of {JITTER_REL:g} to input data before estimating")

    p = _Parser(prog="lncmi", description="kNN mutual information estimation with local nonuniformity correction")
    p.add_argument("--version", action="version", version=f"lncmi {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    est = sub.add_parser("estimate", parents=[common], help="estimate MI between columns of a CSV file")
    est.add_argument("--input", required=True)
    est.add_argument("--cols", type=name_list(), help="comma-separated column names (default: all)")
    est.add_argument("--est", choices=ESTIMATORS, default="lnc")
    est.add_argument("--k", type=positive_int, required=True)
    est.add_argument("--missing-token", default="")

    cal = sub.add_parser("calibrate", parents=[common], help="estimate alpha(k, d) by Monte Carlo")
    cal.add_argument("--k", type=int_list, required=True)
    cal.add_argument("--d", type=int_list, required=True)
    cal.add_argument("--trials", type=positive_int, default=calibration.DEFAULT_TRIALS)
    cal.add_argument("--quantile", type=float, default=calibration.DEFAULT_QUANTILE)
    cal.add_argument("--v-mode", choices=calibration.V_MODES, default="empirical")

    sw = sub.add_parser("sweep", parents=[common], help="estimates across noise levels")
    sw.add_argument("--family", type=name_list(synthgen.family_names()), default=["linear"])
    sw.add_argument("--sigmas", type=float_list, default=float_list("1e-1..1e-5"))
    sw.add_argument("--n", type=positive_int, default=5000)
    sw.add_argument("--est", type=name_list(ESTIMATORS), default=["ksg", "lnc"])
    sw.add_argument("--k", type=positive_int, required=True)
    sw.add_argument("--seeds", type=positive_int, default=10, help="number of seeds, starting at --seed")

    cv = sub.add_parser("converge", parents=[common], help="estimates across sample sizes")
    cv.add_argument("--family", choices=synthgen.family_names(), default="linear")
    cv.add_argument("--sigma", type=float, default=1e-3)
    cv.add_argument("--n-grid", type=int_list, default=int_list("125..8000"))
    cv.add_argument("--est", type=name_list(ESTIMATORS), default=["ksg", "lnc"])
    cv.add_argument("--k", type=positive_int, required=True)
    cv.add_argument("--seeds", type=positive_int, default=10)

    cx = sub.add_parser("complexity", parents=[common], help="empirical sample complexity against the lower bound")
    cx.add_argument("--eps", type=float, default=0.1)
    cx.add_argument("--k", type=positive_int, required=True)
    cx.add_argument("--targets", type=float_list, default=[0.7, 1.4, 2.1, 2.8, 3.5, 4.2])
    cx.add_argument("--trials", type=positive_int, default=10)
    cx.add_argument("--n-cap", type=positive_int, default=2**18)
    cx.add_argument("--n-floor", type=positive_int, default=16)
    cx.add_argument("--est", choices=ESTIMATORS, default="ksg")

    rk = sub.add_parser("rank", parents=[common], help="ranking stability of pairwise MI under subsampling")
    rk.add_argument("--input", help="CSV file (default: seeded planted-ladder data)")
    rk.add_argument("--cols", type=name_list())
    rk.add_argument("--missing-token", default="")
    rk.add_argument("--est", type=name_list(ESTIMATORS), default=["ksg", "lnc"])
    rk.add_argument("--k", type=positive_int, required=True)
    rk.add_argument("--fractions", type=float_list, default=[0.1, 0.3, 0.5, 0.7, 0.9, 1.0])
    rk.add_argument("--repeats", type=positive_int, default=200)
    rk.add_argument("--top-m", type=positive_int, default=150)
    rk.add_argument("--min-rows", type=positive_int, default=experiments.MIN_ROWS)

    sy = sub.add_parser("synergy", parents=[common], help="synergy scores of column triples")
    sy.add_argument("--input", help="CSV file (default: seeded planted (X + Y) mod 1 triple)")
    sy.add_argument("--cols", type=name_list())
    sy.add_argument("--missing-token", default="")
    sy.add_argument("--n", type=positive_int, default=2000, help="rows of the planted data")
    sy.add_argument("--est", type=name_list(ESTIMATORS), default=["ksg", "lnc"])
    sy.add_argument("--k", type=positive_int, required=True)
    sy.add_argument("--ss-threshold", type=float, default=0.0)
    sy.add_argument("--pair-threshold", type=float)
    sy.add_argument("--min-rows", type=positive_int, default=experiments.MIN_ROWS)
    return p


def _config(args):
    skip = {"out", "func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _alpha_setup(args, estimators, k, dims):
    """Resolve the LNC threshold source once for every dimension in ``dims``.

    Returns ``(alpha, table, provenance)`` where ``alpha`` goes into
    EstimatorConfig and ``table`` backs ``"auto"`` lookups.
    """
    if "lnc" not in estimators:
        return None, None, {"source": "unused"}
    if isinstance(args.alpha, float):
        return args.alpha, None, {"source": "value", "alpha": args.alpha}
    if args.alpha == "calibrate":
        entries = {}
        for d in dims:
            a = calibration.estimate_alpha(k, d, args.calib_trials, seed=args.seed, threads=args.threads)
            entries[(k, d)] = calibration.AlphaEntry(
                a, args.calib_trials, calibration.DEFAULT_QUANTILE, args.seed, calibration.convention_tag("empirical"))
        table, source = calibration.AlphaTable(entries), "calibrated"
    else:
        path = args.alpha_table or os.environ.get(calibration.ENV_TABLE)
        table = calibration.AlphaTable.load(path) if path else calibration.default_table()
        source = path or "bundled"
    used = {f"k={k},d={d}": asdict(table.entry(k, d)) for d in dims}
    return "auto", table, {"source": "table" if source != "calibrated" else source,
                           "table": source, "entries": used}


def _meta(args, alpha_prov):
    return {
        "tool": "lncmi",
        "version": __version__,
        "command": args.command,
        "config": _config(args),
        "convention": {"marginal": args.convention, "geometry": CONVENTION},
        "alpha": alpha_prov,
        "units": "bits" if args.bits else "nats",
    }


def _to_bits(records):
    out = []
    for r in records:
        changes = {
            f.name: getattr(r, f.name) / math.log(2)
            for f in fields(r)
            if f.name in INFO_FIELDS and isinstance(getattr(r, f.name), float)
        }
        out.append(replace(r, **changes))
    return out


def _emit(args, records, meta, record_type):
    if args.bits:
        records = _to_bits(records)
    body, sidecar = experiments.render_records(records, args.format, meta, record_type)
    if args.out:
        experiments.write_records(records, args.out, args.format, meta, record_type)
    else:
        if sidecar is not None:
            sys.stdout.write("# " + json.dumps(json.loads(sidecar), sort_keys=True) + "\n")
        sys.stdout.write(body)


def _load(args):
    data = ingest_csv(args.input, args.missing_token)
    if args.cols:
        data = data.project(args.cols)
    return data


@dataclass(frozen=True)
class EstimateRecord:
    estimator: str
    columns: str
    n: int
    k: int
    alpha: float
    estimate: float
    corrected_fraction: float
    floored_count: int


def cmd_estimate(args):
    data = _load(args)
    cols = list(data.column_names)
    view = select_complete(data, cols, min_rows=args.k + 1).dataset()
    if args.jitter:
        view = deduplicate_jitter(view, JITTER_REL, args.seed)
    alpha, table, prov = _alpha_setup(args, [args.est], args.k, [view.d])
    cfg = EstimatorConfig(args.k, alpha, args.convention)
    res = estimate_mi(view, args.est, cfg, table)
    used_alpha = None
    if args.est == "lnc":
        used_alpha = alpha if isinstance(alpha, float) else table.lookup(args.k, view.d)
    rec = EstimateRecord(args.est, "|".join(cols), view.n, args.k, used_alpha,
                         float(res.value), res.corrected_fraction, res.floored_count)
    meta = _meta(args, prov)
    if args.out:
        _emit(args, [rec], meta, EstimateRecord)
    shown = _to_bits([rec])[0] if args.bits else rec
    unit = "bits" if args.bits else "nats"
    print(f"estimate: {shown.estimate!r} {unit}")
    print(f"estimator: {rec.estimator}")
    print(f"n: {rec.n}")
    if args.est == "lnc":
        print(f"alpha: {rec.alpha!r}")
        print(f"corrected_fraction: {rec.corrected_fraction!r}")
        print(f"floored_count: {rec.floored_count}")
    print("config: " + json.dumps(experiments.jsonable(meta), sort_keys=True))
    return 0


@dataclass(frozen=True)
class CalibrationRecord:
    d: int
    k: int
    alpha: float
    trials: int
    quantile: float
    seed: int
    convention: str


def cmd_calibrate(args):
    entries = {}
    for d in args.d:
        for k in args.k:
            a = calibration.estimate_alpha(k, d, args.trials, args.quantile, args.seed, args.v_mode, args.threads)
            entries[(k, d)] = calibration.AlphaEntry(a, args.trials, args.quantile, args.seed,
                                                     calibration.convention_tag(args.v_mode))
            print(f"k={k} d={d} alpha={a!r}")
    meta = _meta(args, {"source": "calibrated"})
    if args.out and args.format == "csv":
        table = calibration.AlphaTable.load(args.out) if os.path.exists(args.out) else calibration.AlphaTable()
        for (k, d), e in entries.items():
            table = table.with_entry(k, d, e)
        table.save(args.out)
        with open(experiments.meta_path(args.out), "w", encoding="utf-8") as fh:
            fh.write(json.dumps(experiments.jsonable(meta), indent=2, sort_keys=True) + "\n")
    elif args.out:
        recs = [CalibrationRecord(d, k, **asdict(e)) for (k, d), e in sorted(entries.items(), key=lambda x: x[0][::-1])]
        experiments.write_records(recs, args.out, "json", meta, CalibrationRecord)
    return 0


def _sweep_dims(families):
    return sorted({synthgen.RelationshipSpec(f, 0.0, n=1).d for f in families})


def cmd_sweep(args):
    alpha, table, prov = _alpha_setup(args, args.est, args.k, _sweep_dims(args.family))
    cfg = EstimatorConfig(args.k, alpha, args.convention)
    seeds = range(args.seed, args.seed + args.seeds)
    recs = experiments.noise_sweep(args.family, args.sigmas, args.n, cfg, args.est, seeds, table, args.threads)
    _emit(args, recs, _meta(args, prov), experiments.SweepRecord)
    return 0


def cmd_converge(args):
    alpha, table, prov = _alpha_setup(args, args.est, args.k, _sweep_dims([args.family]))
    cfg = EstimatorConfig(args.k, alpha, args.convention)
    seeds = range(args.seed, args.seed + args.seeds)
    recs = experiments.convergence_run(args.family, args.sigma, cfg, args.n_grid, seeds, args.est, table, args.threads)
    _emit(args, recs, _meta(args, prov), experiments.SweepRecord)
    return 0


def cmd_complexity(args):
    alpha, table, prov = _alpha_setup(args, [args.est], args.k, [2])
    if isinstance(alpha, float):
        table = calibration.AlphaTable({(args.k, 2): calibration.AlphaEntry(alpha, 0, 0.0, 0, "value")})
    recs = experiments.sample_complexity(args.targets, args.eps, args.k, args.trials, args.n_cap, args.n_floor,
                                         args.est, args.seed, args.threads, table)
    _emit(args, recs, _meta(args, prov), experiments.ComplexityRecord)
    return 0


def _scan_data(args, planted):
    if args.input:
        return _load(args)
    data = planted()
    return data.project(args.cols) if args.cols else data


def cmd_rank(args):
    data = _scan_data(args, lambda: experiments.planted_ladder(seed=args.seed))
    alpha, table, prov = _alpha_setup(args, args.est, args.k, [2])
    cfg = EstimatorConfig(args.k, alpha, args.convention)
    recs = []
    for est in args.est:
        recs += experiments.rank_stability(
            data, est, cfg, args.fractions, args.repeats, args.top_m, args.min_rows,
            JITTER_REL if args.jitter else 0.0, args.seed, table, args.threads)
    _emit(args, recs, _meta(args, prov), experiments.RankStabilityRecord)
    return 0


def cmd_synergy(args):
    data = _scan_data(args, lambda: experiments.planted_synergy(n=args.n, seed=args.seed))
    if args.jitter:
        data = deduplicate_jitter(data, JITTER_REL, args.seed)
    alpha, table, prov = _alpha_setup(args, args.est, args.k, [2, 3])
    cfg = EstimatorConfig(args.k, alpha, args.convention)
    recs = []
    for est in args.est:
        recs += experiments.synergy_scan(data, est, cfg, args.ss_threshold, args.pair_threshold,
                                         args.min_rows, table, args.threads)
    _emit(args, recs, _meta(args, prov), experiments.SynergyRecord)
    return 0


COMMANDS = {
    "estimate": cmd_estimate,
    "calibrate": cmd_calibrate,
    "sweep": cmd_sweep,
    "converge": cmd_converge,
    "complexity": cmd_complexity,
    "rank": cmd_rank,
    "synergy": cmd_synergy,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except AlphaUnavailable as e:
        print(f"lncmi: error: {e}", file=sys.stderr)
        return EXIT_ALPHA
    except (DataError, OSError) as e:
        print(f"lncmi: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as e:
        print(f"lncmi: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
