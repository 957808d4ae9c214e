import numpy as np
import pytest

from quadroll import archimedes as ar


def test_slice_factorization_values():
    assert ar.slice_factorization(0.0) == (0.0, 0.0)
    assert ar.slice_factorization(0.5) == (0.25, 0.25)
    assert ar.slice_factorization(1.0) == (1.0, 1.0)
    with pytest.raises(ValueError):
        ar.slice_factorization(1.5)


def test_ledger_exact_per_slice():
    for n in (2, 10, 1000, 4321):
        led = ar.balance_ledger(n)
        assert led.factorization_residual == 0.0
        assert abs(led.M_left - led.M_right) <= 1e-14


def test_balance_moments():
    ml, mr, _ = ar.balance_moments(10)
    assert abs(ml - mr) <= 1e-14
    _, _, area = ar.balance_moments(1000)
    assert abs(area - ar.PARABOLA_AREA) <= 1e-6
    ratio = ar.convergence_ratio(lambda n: ar.balance_moments(n)[2],
                                 ar.PARABOLA_AREA, 1000)
    assert 3.5 <= ratio <= 4.5


def test_midpoint_error_oracle():
    # composite midpoint error for f = x^2 on [0,1]: exactly -1/(12 n^2)
    n = 100
    _, _, area = ar.balance_moments(n)
    assert area - ar.PARABOLA_AREA == pytest.approx(-1.0 / (12 * n * n), rel=1e-10)


def test_segment_triangle_ratio():
    assert abs(ar.segment_triangle_ratio(1000) - 4.0 / 3.0) <= 1e-5
    ratio = ar.convergence_ratio(ar.segment_triangle_ratio, 4.0 / 3.0, 1000)
    assert 3.5 <= ratio <= 4.5
    # scale invariance: shallow chords give the same ratio
    for c in (1e-3, 0.37, 12.0):
        assert abs(ar.segment_triangle_ratio(2000, c) - 4.0 / 3.0) <= 1e-5


def test_segment_centroid():
    ybar, xbar = ar.segment_centroid(1000)
    assert abs(ybar - 0.6) <= 1e-5
    assert abs(xbar) <= 1e-14
    ratio = ar.convergence_ratio(lambda n: ar.segment_centroid(n)[0], 0.6, 1000)
    assert 3.5 <= ratio <= 4.5


def test_exact_limits_by_analytic_integration():
    # oracle: closed-form integrals for the segment cut by y = 1
    area = 2.0 - 2.0 / 3.0                      # int_{-1}^{1} (1 - x^2) dx
    moment = 0.5 * (2.0 - 2.0 / 5.0)            # int (1 - x^4)/2 dx
    assert area == pytest.approx(4.0 / 3.0)
    assert moment / area == pytest.approx(3.0 / 5.0)


def test_n_floor():
    with pytest.raises(ValueError):
        ar.balance_moments(1)
    with pytest.raises(ValueError):
        ar.segment_triangle_ratio(0)
    # n = 2 stays valid, coarse
    _, _, area = ar.balance_moments(2)
    assert abs(area - ar.PARABOLA_AREA) <= 0.05
