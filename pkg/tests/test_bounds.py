import logging
import math

import pytest

from lncmi.bounds import BoundQuery, knn_sample_lower_bound, ksg_estimate_upper_bound, ksg_sample_lower_bound


def test_ksg_lower_bound_examples():
    assert ksg_sample_lower_bound(BoundQuery(5.0, 0.1, 2, 1)) == pytest.approx(math.exp(4.9) + 1, rel=1e-15)
    assert ksg_sample_lower_bound(BoundQuery(5.0, 0.1, 2, 1)) == pytest.approx(135.29, abs=0.005)
    for k in (1, 3, 10):
        c = math.exp(-(k - 1) / k)
        assert ksg_sample_lower_bound(BoundQuery(0.7, 0.7, 3, k)) == pytest.approx(c + 1, rel=1e-15)
    big = ksg_sample_lower_bound(BoundQuery(0.2, 0.2, 2, 10**9))
    assert big - 1 == pytest.approx(math.exp(-1), rel=1e-8)


def test_knn_lower_bound_examples(caplog):
    q = BoundQuery(5.0, 0.1, 2, 1)
    assert knn_sample_lower_bound(q, C_override=1.0) == pytest.approx(math.exp(4.9) + 1, rel=1e-15)
    with caplog.at_level(logging.INFO, logger="lncmi.bounds"):
        v = knn_sample_lower_bound(q)
    assert v == pytest.approx(0.5 * math.exp(4.9) + 1, rel=1e-15)
    assert v == pytest.approx(68.14, abs=0.01)
    assert "C = 1/d" in caplog.text
    assert knn_sample_lower_bound(BoundQuery(1.0, 1.0, 4), C_override=2.5) == 3.5


def test_upper_bound_examples():
    assert ksg_estimate_upper_bound(5001, 5, 2) == pytest.approx(math.log(5000) + 0.8, rel=1e-15)
    assert round(ksg_estimate_upper_bound(5001, 5, 2), 3) == 9.317
    assert ksg_estimate_upper_bound(101, 1, 3) == 2 * math.log(100)
    with pytest.raises(ValueError):
        ksg_estimate_upper_bound(1, 1, 2)


def test_query_validation():
    with pytest.raises(ValueError):
        BoundQuery(1.0, 0.1, 1)
    with pytest.raises(ValueError):
        BoundQuery(1.0, -0.1, 2)
    with pytest.raises(ValueError):
        BoundQuery(1.0, 0.1, 2, 0)


def test_monotonicity():
    f = lambda I=3.0, e=0.1, d=3: ksg_sample_lower_bound(BoundQuery(I, e, d, 2))
    assert f(I=3.1) > f()
    assert f(e=0.2) < f()
    assert f(d=4) < f()
