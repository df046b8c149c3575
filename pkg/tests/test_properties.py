from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from growthgap import _numerics as N
from growthgap import config as C
from growthgap import diffeo as D
from growthgap.bounds import BoundSpec, upper_bound
from growthgap.dynamics import iterate, log_deriv_product
from growthgap.modulus import Modulus, concave_majorant, subadditivity_defect

H = Modulus.holder(0.5)
MAPS = {
    "f0_holder": D.from_modulus(H, 0.25),
    "f0_sqrtlog": D.from_modulus(Modulus.sqrtlog(), 0.25),
    "feps": D.sharpness_family(H, 0.5, 32),
    "moebius": D.moebius_test(),
}
unit = st.floats(0.0, 1.0, allow_nan=False)
finite = st.floats(-1e12, 1e12, allow_nan=False)


@given(finite, finite)
def test_two_sum_is_exact(a, b):
    s, e = N.two_sum(a, b)
    assert Fraction(s) + Fraction(e) == Fraction(a) + Fraction(b)


@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_two_prod_is_exact(a, b):
    assume(a == 0 or b == 0 or abs(a * b) > 1e-290)
    p, e = N.two_prod(a, b)
    assert Fraction(p) + Fraction(e) == Fraction(a) * Fraction(b)


@given(st.sampled_from([H, Modulus.lipschitz(), Modulus.sqrtlog(), Modulus.invlog(), Modulus.xlog()]),
       unit, unit)
def test_builtin_moduli_monotone_and_subadditive(m, a, b):
    lo, hi = sorted((a, b))
    assert m(lo) <= m(hi)
    if a + b <= 1:
        assert m(a + b) <= m(a) + m(b) + 1e-15


@given(st.sampled_from([H, Modulus.lipschitz(), Modulus.sqrtlog(), Modulus.invlog()]), st.floats(0.0, 0.999))
def test_modulus_inverse_round_trip(m, y):
    y = y * float(m(1.0))
    # slowly varying moduli send representable y to preimages below the double range
    assume(y == 0 or y >= float(m(1e-300)))
    assert abs(float(m(m.inverse(y))) - y) <= 1e-12


@st.composite
def tables(draw):
    k = draw(st.integers(2, 8))
    steps = draw(st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k))
    rises = draw(st.lists(st.floats(0.0, 1.0), min_size=k, max_size=k))
    x = np.concatenate(([0.0], np.cumsum(steps)))
    y = np.concatenate(([0.0], np.cumsum(rises)))
    return Modulus.tabulated(x / x[-1], y + np.linspace(0, 1e-3, y.size))


@settings(max_examples=40, deadline=None)
@given(tables())
def test_majorant_sandwich(m):
    star = concave_majorant(m, 512)
    x = np.linspace(0, 1, 513)
    w, ws = m(x), star(x)
    assert np.all(ws >= w - 1e-9)
    # midpoint concavity on the sample grid
    assert np.all(ws[1:-1] >= 0.5 * (ws[:-2] + ws[2:]) - 1e-9)
    if subadditivity_defect(m, np.linspace(0, 1, 129)) <= 0:
        assert np.all(ws <= 2 * w + 1e-9)


@settings(deadline=None)
@given(st.sampled_from(sorted(MAPS)), unit)
def test_inverse_eval_residual(name, y):
    f = MAPS[name]
    x = f.inverse_eval(y)
    assert abs(float(f(x)) - y) <= 1e-13


@settings(deadline=None)
@given(st.sampled_from(sorted(MAPS)), unit)
def test_inverse_derivative_identity(name, x):
    f = MAPS[name]
    y = f(x)
    assert float(f.inverse().deriv(y)) * float(f.deriv(x)) == pytest.approx(1.0, abs=1e-9)


@settings(deadline=None)
@given(st.sampled_from(sorted(MAPS)), unit, st.integers(1, 30), st.integers(1, 30))
def test_chain_rule_additivity(name, x, m, n):
    f = MAPS[name]
    whole = log_deriv_product(f, x, m + n)
    split = log_deriv_product(f, x, m) + log_deriv_product(f, iterate(f, x, m), n)
    assert abs(whole - split) <= 1e-10 * (m + n)


@settings(deadline=None)
@given(st.integers(32, 10 ** 6))
def test_sharpness_maps_reciprocals(k):
    assert abs(float(MAPS["feps"](1.0 / k)) - 1.0 / (k + 1)) <= 1e-12


@given(st.sampled_from(["thm3", "thm4", "thm5", "cor5_1", "cor5_2"]), st.floats(0, 100), st.floats(0, 100),
       st.integers(1, 10 ** 9))
def test_upper_bound_monotone_in_constant(th, c1, c2, n):
    lo, hi = sorted((c1, c2))
    a = upper_bound(BoundSpec(th, H, {"C": lo, "alpha": 0.5}), n)
    b = upper_bound(BoundSpec(th, H, {"C": hi, "alpha": 0.5}), n)
    assert b >= a


keys = st.from_regex(r"[a-z][a-z_.]{0,12}", fullmatch=True)
values = st.from_regex(r"[A-Za-z0-9_.:,-]{1,12}", fullmatch=True)


@given(st.dictionaries(keys, values, max_size=8))
def test_config_dump_round_trip(cfg):
    assert C.parse_text(C.dump(cfg)) == cfg


@settings(deadline=None)
@given(st.sampled_from(["f0_holder", "f0_sqrtlog", "feps"]), st.floats(1e-9, 0.999), st.integers(1, 200))
def test_trajectories_do_not_overshoot(name, x, n):
    f = MAPS[name]
    pts = [x]
    for _ in range(n):
        pts.append(iterate(f, pts[-1], 1))
    # contracting constructions decrease monotonically toward 0 and never cross it
    assert all(0.0 <= b <= a for a, b in zip(pts, pts[1:]))
