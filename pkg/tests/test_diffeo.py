import numpy as np
import pytest
from scipy.integrate import quad

from growthgap import diffeo as D
from growthgap.errors import ConstructionError, SpecError
from growthgap.modulus import Modulus

H = Modulus.holder(0.5)
L = Modulus.lipschitz()


@pytest.fixture(scope="module")
def f0_lip():
    return D.from_modulus(L, 0.4)


@pytest.fixture(scope="module")
def feps():
    return D.sharpness_family(H, 0.5, 32)


def test_f0_examples(f0_lip):
    assert f0_lip(0.1) == pytest.approx(0.095, abs=1e-15)
    assert D.from_modulus(H, 0.25)(0.04) == pytest.approx(0.04 - (2 / 3) * 0.04 ** 1.5, abs=1e-15)


@pytest.mark.parametrize("m", [H, L, Modulus.sqrtlog(), Modulus.invlog(), Modulus.xlog()], ids=lambda m: m.label())
def test_f0_endpoints(m):
    f = D.from_modulus(m, 0.25)
    assert f(0.0) == 0.0 and f(1.0) == 1.0
    assert f.deriv(0.0) == 1.0 and f.deriv(1.0) == pytest.approx(1.0, abs=1e-15)
    x = np.linspace(0, 1, 4097)[1:-1]
    assert np.all(f.displacement(x) < 0)
    assert np.all(f.deriv(x) > 0)


def test_f0_against_quadrature():
    m = Modulus.sqrtlog()
    f = D.from_modulus(m, 0.25)
    for x in (1e-9, 1e-4, 0.01, 0.2, 0.25):
        integral = quad(lambda t: float(m(t)), 0, x, epsabs=0, epsrel=1e-13, limit=200)[0]
        assert -f.displacement(x) == pytest.approx(integral, rel=1e-12)


def test_f0_expanding_mirrors():
    f = D.from_modulus(H, 0.25, "expanding")
    assert f(0.04) == pytest.approx(0.04 + (2 / 3) * 0.04 ** 1.5, abs=1e-15)
    x = np.linspace(0, 1, 1025)[1:-1]
    assert np.all(f.displacement(x) > 0)


@pytest.mark.parametrize("m, eps", [(Modulus.holder(0.5, scale=3), 0.25), (H, 0.5), (H, 0.0)])
def test_f0_rejects(m, eps):
    with pytest.raises(ConstructionError):
        D.from_modulus(m, eps)


def test_sharpness_basics(feps):
    assert feps(0.0) == 0.0 and feps.deriv(0.0) == 1.0
    assert feps.description["a_eps"] == 1 / 32
    k = np.arange(32, 2000, dtype=float)
    assert np.max(np.abs(feps(1.0 / k) - 1.0 / (k + 1))) <= 1e-12
    x = np.linspace(0, 1, 1 << 14)[1:-1]
    assert np.all(feps.deriv(x) > 0)
    assert np.all(feps.displacement(x) < 0)


def test_sharpness_orbit_of_reciprocal(feps):
    x = 1.0 / 40
    for j in range(1, 5000):
        x = float(feps(x))
    assert x == pytest.approx(1.0 / (40 + 4999), abs=1e-12)


def test_sharpness_rejects_tiny_window():
    with pytest.raises(ConstructionError):
        D.sharpness_family(H, 0.5, k_min=2_000_000)


def test_sharpness_membership_bounded():
    # constant grows as eps shrinks at fixed resolution; all stay under c_abs
    cs = [D.sharpness_family(H, eps).description["membership_C"] for eps in (0.5, 0.25, 0.1)]
    assert all(0 < c <= 1000 for c in cs)


def test_paste_empty_is_identity():
    f = D.paste(D.PastedSpec(()))
    x = np.linspace(0, 1, 11)
    assert np.array_equal(f(x), x)


def test_paste_single_block_matches_base():
    base = D.sharpness_family(H, 0.5, 1024)
    f = D.paste(D.PastedSpec((D.Block(0.5, 0.9, base, 0.5),)))
    u = np.linspace(0, base.window[1], 501)
    assert np.max(np.abs(f(0.5 + u) - (0.5 + base(u)))) <= 1e-14
    assert np.all(f(np.linspace(0, 0.5, 11)) == np.linspace(0, 0.5, 11))


def test_paste_derivative_continuous_at_joints():
    blocks = (D.Block(0.55, 0.95, D.sharpness_family(H, 0.5, 1024), 0.5),
              D.Block(0.05, 0.45, D.sharpness_family(H, 0.25, 1024), 0.25))
    f = D.paste(D.PastedSpec(blocks))
    h = 1e-10
    for blk in blocks:
        for j in (blk.a, blk.a + blk.width, blk.b):
            assert abs(float(f.deriv(j + h)) - float(f.deriv(j - h))) <= 1e-6


def test_paste_rejects_overlap():
    b1 = D.Block(0.55, 0.95, D.sharpness_family(H, 0.5, 1024), 0.5)
    b2 = D.Block(0.5, 0.9, D.sharpness_family(H, 0.25, 1024), 0.25)
    with pytest.raises(SpecError):
        D.paste(D.PastedSpec((b1, b2)))


def test_inverse_eval_examples(f0_lip):
    assert f0_lip.inverse_eval(0.095) == pytest.approx(0.1, abs=1e-14)
    assert D.identity().inverse_eval(0.3) == 0.3
    mob = D.moebius_test()
    y = np.linspace(0, 1, 101)
    assert np.max(np.abs(mob.inverse_eval(y) - y / (2 - y))) <= 1e-15
    assert mob.inverse_eval(1.0) == 1.0


def test_inverse_eval_residual(feps):
    y = np.linspace(0, 1, 4001)
    assert np.max(np.abs(feps(feps.inverse_eval(y)) - y)) <= 1e-13


def test_compose_and_inverse_maps(f0_lip, feps):
    x = np.linspace(0, 1, 257)
    h = f0_lip.compose(feps)
    assert np.allclose(h(x), f0_lip(feps(x)), atol=0, rtol=0)
    g = feps.inverse()
    assert np.max(np.abs(g(feps(x)) - x)) <= 1e-13


def test_derivative_modulus_examples(f0_lip):
    d = np.array([1e-4, 1e-3, 1e-2])
    _, w = D.estimate_derivative_modulus(D.identity(), d)
    assert np.all(w == 0)
    _, w = D.estimate_derivative_modulus(f0_lip, d, window=(0.0, 0.4))
    # exact on the sampled grid: the largest sampled gap not exceeding delta
    step = 0.4 / (D.CERT_POINTS - 1)
    assert np.all(w <= d * (1 + 1e-12)) and np.all(w >= d - step * (1 + 1e-9))


def test_membership_examples(f0_lip):
    d = np.geomspace(1e-4, 0.1, 7)
    assert D.membership_constant(D.identity(), H, d) == 0
    assert D.membership_constant(f0_lip, L, d, window=(0.0, 0.4)) <= 1 + 1e-6
    f = D.from_modulus(H, 0.25)
    assert D.membership_constant(f, H, d, window=(0.0, 0.25)) <= 1 + 1e-6


def test_claim1_bracket(f0_lip):
    rmin, rmax, lo, hi = D.claim1_ratio_bounds(f0_lip, 0.01, 0.3)
    assert lo <= rmin and rmax <= hi


def test_claim2_margins(f0_lip):
    dm, vm, count = D.claim2_margins(f0_lip, L, 0.05)
    assert count > 0 and dm <= 1 and vm <= 1
