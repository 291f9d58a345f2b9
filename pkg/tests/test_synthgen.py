import math

import numpy as np
import pytest
from scipy import integrate, stats

from lncmi import synthgen as sg
from lncmi.errors import TruthUnavailable


def test_linear_truth_examples():
    assert sg.true_mi(sg.RelationshipSpec("linear", 1.0)).value == pytest.approx(0.5, abs=1e-15)
    assert sg.true_mi(sg.RelationshipSpec("linear", 0.01)).value == pytest.approx(4.6102, abs=5e-5)


def _trapezoid_oracle(sigma):
    # H(Y) of U(0,1) + U(-s/2, s/2) from its explicit piecewise-linear density
    lo, hi = min(1.0, sigma), max(1.0, sigma)

    def p(y):
        t = y + sigma / 2
        return max(0.0, min(t, lo, 1 + sigma - t)) / (lo * hi)

    def g(y):
        v = p(y)
        return -v * math.log(v) if v > 0 else 0.0

    knots = [0.0, lo, hi, 1.0 + sigma]
    h = sum(integrate.quad(g, a - sigma / 2, b - sigma / 2, epsabs=1e-13)[0] for a, b in zip(knots, knots[1:]))
    return h - math.log(sigma)


@pytest.mark.parametrize("sigma", [1.0, 0.1, 0.01, 0.001, 3.0])
def test_linear_closed_form_agrees_with_quadrature(sigma):
    spec = sg.RelationshipSpec("linear", sigma)
    closed = sg.true_mi(spec)
    quad = sg.true_mi(spec, force_quadrature=True)
    assert closed.method == "closed-form" and quad.method == "quadrature"
    assert quad.value == pytest.approx(closed.value, abs=1e-6)
    assert _trapezoid_oracle(sigma) == pytest.approx(closed.value, abs=1e-6)


def test_divergence_rate():
    for sigma in (1e-2, 1e-4, 1e-6):
        gap = sg.true_mi(sg.RelationshipSpec("linear", sigma)).value - math.log(1 / sigma)
        assert gap == pytest.approx(sigma / 2, rel=1e-9)


def test_gaussian_and_independent():
    assert sg.true_mi(sg.RelationshipSpec("gaussian-rho", rho=0.0)).value == 0.0
    assert sg.true_mi(sg.RelationshipSpec("gaussian-rho", rho=0.6)).value == pytest.approx(0.22314355, abs=1e-8)
    assert sg.true_mi(sg.RelationshipSpec("independent-uniform", dim=4)).value == 0.0


ANALYTIC_CDF = {
    # CDF of f(X), X ~ U(0, 1), written out by hand
    "quadratic": (lambda t: math.sqrt(min(max(t, 0.0), 1.0)), [0.0, 1.0]),
    "sqrt": (lambda t: min(max(t, 0.0), 1.0) ** 2, [0.0, 1.0]),
    "exponential": (lambda t: math.log2(min(max(t, 1.0), 2.0)), [1.0, 2.0]),
    "step": (lambda t: min(max(math.floor(3 * t + 1e-12) + 1, 0), 4) / 4 if t >= 0 else 0.0,
             [0.0, 1 / 3, 2 / 3, 1.0]),
}


def _cdf_oracle(cdf, knots, sigma):
    h = sigma / 2

    def g(y):
        v = (cdf(y + h) - cdf(y - h)) / sigma
        return -v * math.log(v) if v > 0 else 0.0

    pts = sorted({c + s for c in knots for s in (-h, h)})
    total = sum(integrate.quad(g, a, b, limit=200, epsabs=1e-12)[0] for a, b in zip(pts, pts[1:]))
    return total - math.log(sigma)


@pytest.mark.parametrize("family", sorted(ANALYTIC_CDF))
@pytest.mark.parametrize("sigma", [0.3, 0.01])
def test_quadrature_against_hand_cdf(family, sigma):
    cdf, knots = ANALYTIC_CDF[family]
    truth = sg.true_mi(sg.RelationshipSpec(family, sigma))
    assert truth.est_error <= 1e-4
    assert truth.value == pytest.approx(_cdf_oracle(cdf, knots, sigma), abs=1e-6)


@pytest.mark.parametrize("family", ["cubic", "sine-low-freq", "sine-high-freq"])
def test_quadrature_against_monte_carlo(family):
    # I = H(Y) - ln sigma; estimate H(Y) by Monte Carlo over the exact density
    sigma = 0.2
    spec = sg.RelationshipSpec(family, sigma)
    truth = sg.true_mi(spec).value
    fam = sg.get_family(family)
    x = np.linspace(0, 1, 400_001)
    fx = np.sort(fam.f(x))

    def p(y):
        return (np.searchsorted(fx, y + sigma / 2) - np.searchsorted(fx, y - sigma / 2)) / (len(fx) * sigma)

    y = sg.generate(sg.RelationshipSpec(family, sigma, n=200_000, seed=11)).values[:, 1]
    mc = -np.mean(np.log(p(y))) - math.log(sigma)
    assert truth == pytest.approx(mc, abs=0.01)


def test_five_d_linear_truth():
    t = sg.true_mi(sg.RelationshipSpec("5d-linear", 1e-3))
    assert t.method == "quadrature" and t.est_error <= 1e-4
    # Irwin-Hall CDF against sampling
    cdf = sg._irwin_hall_cdf(4)
    s = np.random.default_rng(0).random((400_000, 4)).sum(axis=1)
    for q in (0.3, 1.0, 1.7, 2.0, 3.2):
        assert cdf(q) == pytest.approx(np.mean(s <= q), abs=3e-3)


def test_five_d_quadratic_needs_slow_path():
    spec = sg.RelationshipSpec("5d-quadratic", 0.1)
    with pytest.raises(TruthUnavailable):
        sg.true_mi(spec)
    t = sg.true_mi(spec, slow=True)
    assert t.est_error <= 1e-4 and math.isfinite(t.value)


def test_generate_linear_noiseless():
    ds = sg.generate(sg.RelationshipSpec("linear", 0.0, n=500, seed=3))
    np.testing.assert_array_equal(ds.values[:, 1] - ds.values[:, 0], 0.0)


def test_generate_independent():
    ds = sg.generate(sg.RelationshipSpec("independent-uniform", n=5000, seed=0))
    assert abs(np.corrcoef(ds.values.T)[0, 1]) <= 0.05


def test_generate_deterministic_and_shapes():
    spec = sg.RelationshipSpec("5d-quadratic", 0.01, n=100, seed=8)
    a, b = sg.generate(spec), sg.generate(spec)
    np.testing.assert_array_equal(a.values, b.values)
    assert a.d == 5 and a.column_names == ("x1", "x2", "x3", "x4", "y")
    y = a.values[:, 4] - np.square(a.values[:, :4]).sum(axis=1)
    assert np.all(np.abs(y) <= 0.005)


def test_generate_marginals_ks():
    x = sg.generate(sg.RelationshipSpec("quadratic", 0.1, n=5000, seed=0)).values[:, 0]
    assert stats.kstest(x, "uniform").statistic < 1.63 / math.sqrt(5000)


def test_spec_validation():
    with pytest.raises(ValueError):
        sg.RelationshipSpec("nope")
    with pytest.raises(ValueError):
        sg.RelationshipSpec("linear", -1.0)
    with pytest.raises(ValueError):
        sg.RelationshipSpec("linear", dim=3)


def test_registry_is_extensible():
    fam = sg.Family("cube-root", 2, np.cbrt, ((0.0, 1.0),))
    sg.register_family(fam)
    try:
        t = sg.true_mi(sg.RelationshipSpec("cube-root", 0.05))
        oracle = _cdf_oracle(lambda t: min(max(t, 0.0), 1.0) ** 3, [0.0, 1.0], 0.05)
        assert t.value == pytest.approx(oracle, abs=1e-6)
    finally:
        sg._REGISTRY.pop("cube-root")


def test_sigma_for_linear_mi():
    for target in (0.2, 0.5, 0.7, 4.2, 9.0):
        s = sg.sigma_for_linear_mi(target)
        assert sg.linear_closed_form(s) == pytest.approx(target, rel=1e-12)


def test_spearman_examples():
    assert sg.spearman([1, 2, 3, 4], [10, 20, 30, 40]) == 1.0
    assert sg.spearman([1, 2, 3, 4], [4, 3, 2, 1]) == -1.0
    # rank-then-Pearson by hand: ranks [1, 2.5, 2.5, 4] and [1, 3, 2, 4]
    rx, ry = np.array([1, 2.5, 2.5, 4]), np.array([1, 3, 2, 4.0])
    rx, ry = rx - rx.mean(), ry - ry.mean()
    by_hand = (rx @ ry) / math.sqrt((rx @ rx) * (ry @ ry))
    assert sg.spearman([1, 2, 2, 4], [1, 3, 2, 4]) == pytest.approx(by_hand, abs=1e-15)
    assert by_hand == pytest.approx(0.9486832980505138, abs=1e-15)


def test_spearman_matches_scipy(rng):
    for _ in range(50):
        n = int(rng.integers(2, 60))
        x = rng.integers(0, 6, n).astype(float)
        y = rng.integers(0, 6, n).astype(float)
        if np.ptp(x) == 0 or np.ptp(y) == 0:
            continue
        assert sg.spearman(x, y) == pytest.approx(stats.spearmanr(x, y).statistic, abs=1e-12)


def test_spearman_errors():
    with pytest.raises(ValueError):
        sg.spearman([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        sg.spearman([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        sg.spearman([1], [1])
