"""Seeded synthetic relationships with known mutual information.

Functional families draw X ~ U(0, 1) and set Y = f(X) + sigma * U(-1/2, 1/2).
Since the noise is independent of X, I(X; Y) = H(Y) - ln(sigma), and H(Y) is
computed from the exact density of f(X) smoothed by the noise box.

The function shapes other than ``linear`` are reconstructions in the spirit
of the usual benchmark suite, not exact copies of any published table. New
families can be added with :func:`register_family`.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .dataset import Dataset
from .errors import TruthUnavailable

QUAD_TOL = 1e-4


@dataclass(frozen=True)
class Family:
    """A relationship generator.

    ``f`` and ``pieces`` (monotone or constant intervals covering [0, 1]) are
    set for one-input functional families; ``n_inputs`` > 1 families sum a
    transform of several uniform inputs.
    """

    name: str
    dim: int
    f: object = None
    pieces: tuple = ()
    n_inputs: int = 1
    description: str = ""


_REGISTRY = {}


def register_family(family):
    _REGISTRY[family.name] = family
    return family


def family_names():
    return sorted(_REGISTRY)


def get_family(name):
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown family {name!r}; known: {', '.join(family_names())}") from None


def _cubic(x):
    t = 2.4 * x - 1.3
    return 4 * t**3 + t**2 - 4 * t


# turning points of the cubic at t = -2/3 and t = 1/2
_CUBIC_X1 = (1.3 - 2.0 / 3.0) / 2.4


for fam in (
    Family("linear", 2, lambda x: x, ((0.0, 1.0),), description="y = x"),
    Family("quadratic", 2, lambda x: 4.0 * (x - 0.5) ** 2, ((0.0, 0.5), (0.5, 1.0)),
           description="y = 4 (x - 1/2)^2"),
    Family("cubic", 2, _cubic, ((0.0, _CUBIC_X1), (_CUBIC_X1, 0.75), (0.75, 1.0)),
           description="y = 4t^3 + t^2 - 4t, t = 2.4x - 1.3"),
    Family("sine-low-freq", 2, lambda x: np.sin(4 * np.pi * x),
           tuple(zip((0.0, 0.125, 0.375, 0.625, 0.875), (0.125, 0.375, 0.625, 0.875, 1.0))),
           description="y = sin(4 pi x)"),
    Family("sine-high-freq", 2, lambda x: np.sin(16 * np.pi * x),
           tuple(zip([0.0] + [1 / 32 + m / 16 for m in range(16)],
                     [1 / 32 + m / 16 for m in range(16)] + [1.0])),
           description="y = sin(16 pi x)"),
    Family("sqrt", 2, np.sqrt, ((0.0, 1.0),), description="y = sqrt(x)"),
    Family("exponential", 2, lambda x: 2.0 ** x, ((0.0, 1.0),), description="y = 2^x"),
    Family("step", 2, lambda x: np.minimum(np.floor(4 * np.asarray(x)), 3) / 3.0,
           ((0.0, 0.25), (0.25, 0.5), (0.5, 0.75), (0.75, 1.0)),
           description="y = floor(4x) / 3"),
    Family("5d-linear", 5, n_inputs=4, description="y = x1 + x2 + x3 + x4"),
    Family("5d-quadratic", 5, n_inputs=4, description="y = x1^2 + x2^2 + x3^2 + x4^2"),
    Family("gaussian-rho", 2, description="standard bivariate normal, correlation rho"),
    Family("independent-uniform", 2, description="d independent U(0, 1) columns"),
):
    register_family(fam)


@dataclass(frozen=True)
class RelationshipSpec:
    family: str
    noise_sigma: float = 0.0
    n: int = 5000
    seed: int = 0
    rho: float = 0.0
    dim: int = None

    def __post_init__(self):
        fam = get_family(self.family)
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not -1.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (-1, 1)")
        if self.dim is not None and fam.name != "independent-uniform" and self.dim != fam.dim:
            raise ValueError(f"family {fam.name} has fixed dimension {fam.dim}")

    @property
    def d(self):
        if self.family == "independent-uniform" and self.dim is not None:
            return self.dim
        return get_family(self.family).dim


def generate(spec):
    fam = get_family(spec.family)
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    if fam.name == "independent-uniform":
        x = rng.random((n, spec.d))
        return Dataset.from_array(x)
    if fam.name == "gaussian-rho":
        z = rng.standard_normal((n, 2))
        r = spec.rho
        y = r * z[:, 0] + math.sqrt(1.0 - r * r) * z[:, 1]
        return Dataset(np.column_stack([z[:, 0], y]), ("x", "y"))
    x = rng.random((n, fam.n_inputs))
    noise = spec.noise_sigma * (rng.random(n) - 0.5)
    if fam.name == "5d-linear":
        y = x.sum(axis=1) + noise
    elif fam.name == "5d-quadratic":
        y = np.square(x).sum(axis=1) + noise
    else:
        y = fam.f(x[:, 0]) + noise
    names = ["x"] if fam.n_inputs == 1 else [f"x{j + 1}" for j in range(fam.n_inputs)]
    return Dataset(np.column_stack([x, y]), tuple(names) + ("y",))


@dataclass(frozen=True)
class TruthValue:
    value: float
    method: str
    est_error: float = 0.0


def linear_closed_form(sigma):
    """I(X; X + sigma*U(-1/2, 1/2)) for X ~ U(0, 1)."""
    if sigma == 0:
        return math.inf
    if sigma <= 1.0:
        return sigma / 2.0 - math.log(sigma)
    return 1.0 / (2.0 * sigma)


def _piece_cdf(f, a, b):
    """Measure of {x in [a, b]: f(x) <= t} for f monotone (or constant) on [a, b]."""
    fa, fb = float(f(np.float64(a))), float(f(np.float64(b)))
    if fa == fb:
        return lambda t: (b - a) if t >= fa else 0.0
    inc = fb > fa
    lo, hi = min(fa, fb), max(fa, fb)

    def cdf(t):
        if t <= lo:
            return 0.0
        if t >= hi:
            return b - a
        x = optimize.brentq(lambda u: float(f(np.float64(u))) - t, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        return (x - a) if inc else (b - x)

    return cdf


def _entropy_of_smoothed(cdf, knots, sigma):
    """Differential entropy of S + U(-sigma/2, sigma/2) given the CDF of S.

    ``knots`` are the points where the density of S is non-smooth; the
    integration is split at every knot shifted by +-sigma/2.
    """
    h = sigma / 2.0

    def p(y):
        return (cdf(y + h) - cdf(y - h)) / sigma

    def integrand(y):
        v = p(y)
        return -v * math.log(v) if v > 0 else 0.0

    pts = sorted({round(c + s, 15) for c in knots for s in (-h, h)})
    total = 0.0
    err = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if b <= a:
            continue
        val, e = integrate.quad(integrand, a, b, limit=200, epsabs=1e-12, epsrel=1e-11)
        total += val
        err += e
    return total, err


def _functional_truth(fam, sigma):
    pieces = [(_piece_cdf(fam.f, a, b)) for a, b in fam.pieces]

    def cdf(t):
        return sum(c(t) for c in pieces)

    knots = sorted({float(fam.f(np.float64(v))) for ab in fam.pieces for v in ab})
    h_y, err = _entropy_of_smoothed(cdf, knots, sigma)
    return TruthValue(h_y - math.log(sigma), "quadrature", err)


def _irwin_hall_cdf(m):
    coef = [(-1) ** j * math.comb(m, j) / math.factorial(m) for j in range(m + 1)]

    def cdf(s):
        if s <= 0:
            return 0.0
        if s >= m:
            return 1.0
        return sum(coef[j] * (s - j) ** m for j in range(int(math.floor(s)) + 1))

    return cdf


def _sum_of_squares_truth(m, sigma, h0=1e-3, max_halvings=6):
    # slow path: binned numerical convolution of the X^2 law, refined until two
    # successive grids agree within QUAD_TOL
    def run(h):
        edges = np.arange(0.0, 1.0 + h / 2, h)
        mass = np.diff(np.sqrt(edges))
        dist = mass
        for _ in range(m - 1):
            dist = np.convolve(dist, mass)
        # bin j of the sum covers roughly [j h, (j + m) h); smooth by the noise box
        width = max(1, int(round(sigma / h)))
        box = np.ones(width) / width
        dens = np.convolve(dist, box) / h
        dens = dens[dens > 0]
        return float(-(dens * np.log(dens)).sum() * h)

    h = h0
    prev = run(h)
    for _ in range(max_halvings):
        h /= 2
        cur = run(h)
        if abs(cur - prev) <= QUAD_TOL:
            return TruthValue(cur - math.log(sigma), "numerical-convolution", abs(cur - prev))
        prev = cur
    raise TruthUnavailable("sum-of-squares truth did not converge to the requested tolerance")


def true_mi(spec, slow=False, force_quadrature=False):
    """Ground-truth mutual information (total correlation for d > 2) in nats."""
    fam = get_family(spec.family)
    sigma = spec.noise_sigma
    if fam.name == "independent-uniform":
        return TruthValue(0.0, "closed-form")
    if fam.name == "gaussian-rho":
        return TruthValue(-0.5 * math.log1p(-spec.rho**2), "closed-form")
    if sigma == 0:
        return TruthValue(math.inf, "closed-form")
    if fam.name == "linear" and not force_quadrature:
        return TruthValue(linear_closed_form(sigma), "closed-form")
    if fam.name == "5d-linear":
        h_y, err = _entropy_of_smoothed(_irwin_hall_cdf(fam.n_inputs), range(fam.n_inputs + 1), sigma)
        return TruthValue(h_y - math.log(sigma), "quadrature", err)
    if fam.name == "5d-quadratic":
        if not slow:
            raise TruthUnavailable("5d-quadratic truth is only available with slow=True")
        return _sum_of_squares_truth(fam.n_inputs, sigma)
    if fam.f is None:
        raise TruthUnavailable(f"no ground truth for family {fam.name}")
    return _functional_truth(fam, sigma)


def sigma_for_linear_mi(target):
    """Noise level at which the linear family has mutual information ``target``."""
    if target <= 0:
        raise ValueError("target must be > 0")
    if target >= 0.5:
        return optimize.brentq(lambda s: linear_closed_form(s) - target, 1e-300, 1.0, xtol=1e-300, rtol=1e-15)
    return 1.0 / (2.0 * target)


def average_ranks(values):
    """1-based ranks with ties replaced by their average rank."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="mergesort")
    sv = v[order]
    ranks = np.empty(len(v))
    start = 0
    while start < len(v):
        stop = start + 1
        while stop < len(v) and sv[stop] == sv[start]:
            stop += 1
        ranks[order[start:stop]] = 0.5 * (start + stop - 1) + 1.0
        start = stop
    return ranks


def spearman(xs, ys):
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise ValueError("need at least two observations")
    rx = average_ranks(xs)
    ry = average_ranks(ys)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    den = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if den == 0:
        raise ValueError("Spearman correlation undefined for a constant input")
    return float(rx @ ry) / den
