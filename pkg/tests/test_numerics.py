from fractions import Fraction

import numpy as np
import pytest

from growthgap import _numerics as N


def test_two_sum_exact():
    a, b = 1.0, 1e-20
    s, e = N.two_sum(a, b)
    assert Fraction(s) + Fraction(e) == Fraction(a) + Fraction(b)


def test_two_prod_exact():
    a, b = 0.1, 3.0000000000000004
    p, e = N.two_prod(a, b)
    assert Fraction(p) + Fraction(e) == Fraction(a) * Fraction(b)


def test_compensated_cumsum_beats_naive():
    vals = np.array([1.0] + [1e-16] * 10_000)
    out = N.compensated_cumsum(vals)
    assert out[-1] == pytest.approx(1.0 + 1e-12, rel=1e-15)
    assert np.cumsum(vals)[-1] == 1.0


def test_reciprocal_fraction_matches_exact_rational():
    for x in (1 / 3, 1e-7, 3.3e-9, 0.123456789):
        exact = 1 / Fraction(x)
        frac = float(exact - (exact.numerator // exact.denominator))
        assert N.reciprocal_fraction(x) == pytest.approx(frac, rel=1e-13)


def test_sincos_zero_at_reciprocal_integers():
    k = np.arange(32, 10_000, dtype=float)
    s, c = N.sincos_two_pi_over(1.0 / k)
    assert np.max(np.abs(s)) < 1e-9
    assert np.min(c) > 1 - 1e-12


def test_bisect_and_newton_agree():
    y = np.linspace(0.0, 1.0, 101)
    fun = lambda x: x ** 3
    a = N.bisect_increasing(fun, y, 0.0, 1.0)
    b = N.newton_bisect_increasing(fun, lambda x: 3 * x ** 2, y, 0.0, 1.0)
    assert np.max(np.abs(a ** 3 - y)) <= 2e-16
    assert np.max(np.abs(b ** 3 - y)) <= 2e-16


def test_gauss_legendre_polynomial_exact():
    # 8 nodes integrate degree 15 exactly
    val = N.gauss_legendre(lambda t: t ** 15, np.array(0.0), np.array(1.0))
    assert float(val) == pytest.approx(1 / 16, rel=1e-14)


def test_scalar_or_array():
    assert isinstance(N.scalar_or_array(np.array(2.0), 1.0), float)
    assert isinstance(N.scalar_or_array(np.array([2.0]), [1.0]), np.ndarray)
