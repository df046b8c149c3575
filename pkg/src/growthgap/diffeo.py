"""Orientation-preserving C^1 diffeomorphisms of [0, 1] fixing both ends.

Every map is a :class:`Diffeo`: a bundle of vectorised closures for
``f``, ``f'``, the displacement ``f(x) - x`` and ``log f'``.  The
displacement and ``log f'`` are kept as separate closures because the
constructions below know them in closed form with far better relative
accuracy than ``f(x) - x`` or ``log(f'(x))`` formed after the fact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, ndimage

from ._numerics import gauss_legendre, newton_bisect_increasing, scalar_or_array, sincos_two_pi_over
from .errors import ConstructionError, SpecError
from .modulus import Modulus, classify_regularity

CERT_POINTS = 2 ** 14
FREEZE_TOL = 1e-12

Array = np.ndarray
VecFn = Callable[[Array], Array]


@dataclass(frozen=True, eq=False)
class Diffeo:
    """A C^1 diffeomorphism of [0, 1] with ``f(0) = 0`` and ``f(1) = 1``.

    ``window`` is the construction window near 0 (where the map is given by
    the closed form of its constructor), or ``None``.
    """

    func: VecFn
    fprime: VecFn
    disp: VecFn
    log_fprime: VecFn | None = None
    fixed_points: tuple[float, ...] = (0.0, 1.0)
    description: dict = field(default_factory=dict)
    window: tuple[float, float] | None = None

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        return scalar_or_array(self.func(xa), x)

    eval = __call__

    def deriv(self, x):
        xa = np.asarray(x, dtype=float)
        return scalar_or_array(self.fprime(xa), x)

    def displacement(self, x):
        xa = np.asarray(x, dtype=float)
        return scalar_or_array(self.disp(xa), x)

    def log_deriv(self, x):
        xa = np.asarray(x, dtype=float)
        out = self.log_fprime(xa) if self.log_fprime is not None else np.log(self.fprime(xa))
        return scalar_or_array(out, x)

    @property
    def kind(self) -> str:
        return self.description.get("constructor", "custom")

    def inverse_eval(self, y):
        """``f^{-1}(y)`` by bracketed Newton iteration (bisection fallback)."""
        ya = np.asarray(y, dtype=float)
        x = newton_bisect_increasing(self.func, self.fprime, ya, 0.0, 1.0)
        x = np.where(ya <= 0.0, 0.0, np.where(ya >= 1.0, 1.0, x))
        return scalar_or_array(x, y)

    def compose(self, other: "Diffeo") -> "Diffeo":
        """The map ``self o other``."""
        return compose(self, other)

    def inverse(self) -> "Diffeo":
        """Numerical inverse map built on :meth:`inverse_eval`."""
        return numerical_inverse(self)

    def sample(self, n: int = 1025) -> tuple[Array, Array, Array]:
        x = np.linspace(0.0, 1.0, n)
        return x, self.func(x), self.fprime(x)


# -- elementary maps ---------------------------------------------------------


def identity() -> Diffeo:
    return Diffeo(
        func=lambda x: np.array(x, dtype=float, copy=True),
        fprime=lambda x: np.ones_like(x, dtype=float),
        disp=lambda x: np.zeros_like(x, dtype=float),
        log_fprime=lambda x: np.zeros_like(x, dtype=float),
        description={"constructor": "identity"},
    )


def moebius_test() -> Diffeo:
    """``f(x) = 2x/(1+x)``: hyperbolic fixed points, ``f'(0)=2``, ``f'(1)=1/2``."""
    return Diffeo(
        func=lambda x: 2.0 * x / (1.0 + x),
        fprime=lambda x: 2.0 / (1.0 + x) ** 2,
        disp=lambda x: x * (1.0 - x) / (1.0 + x),
        log_fprime=lambda x: math.log(2.0) - 2.0 * np.log1p(x),
        description={"constructor": "moebius_test"},
    )


def compose(f: Diffeo, g: Diffeo) -> Diffeo:
    def func(x):
        return f.func(g.func(x))

    def fprime(x):
        return f.fprime(g.func(x)) * g.fprime(x)

    def logfp(x):
        return f.log_deriv(g.func(x)) + g.log_deriv(x)

    def disp(x):
        gx = g.func(x)
        return f.disp(gx) + g.disp(x)

    common = tuple(sorted(set(f.fixed_points) & set(g.fixed_points)))
    return Diffeo(func, fprime, disp, logfp, fixed_points=common or (0.0, 1.0),
                  description={"constructor": "compose", "outer": f.description, "inner": g.description})


def numerical_inverse(f: Diffeo) -> Diffeo:
    def func(y):
        return np.asarray(f.inverse_eval(y), dtype=float)

    def fprime(y):
        return 1.0 / f.fprime(func(y))

    def logfp(y):
        return -f.log_deriv(func(y))

    def disp(y):
        return -f.disp(func(y))

    return Diffeo(func, fprime, disp, logfp, fixed_points=f.fixed_points,
                  description={"constructor": "inverse", "of": f.description})


# -- polynomial bridges -----------------------------------------------------------


def _hermite_poly(x0: float, x1: float, left: Sequence[float], right: Sequence[float]):
    """Polynomial in ``t = (x-x0)/(x1-x0)`` matching the derivative data
    ``left = (p, p', p'', ...)`` at ``x0`` and ``right`` at ``x1``.

    Returns ``ev(x, order)`` giving the ``order``-th x-derivative (0..2).
    """
    L = x1 - x0
    k = len(left)
    deg = 2 * k - 1
    rows, rhs = [], []
    for t_end, data in ((0.0, left), (1.0, right)):
        for order, val in enumerate(data):
            row = np.zeros(deg + 1)
            for j in range(order, deg + 1):
                row[j] = math.perm(j, order) * t_end ** (j - order)
            rows.append(row)
            rhs.append(val * L ** order)
    coef = np.linalg.solve(np.array(rows), np.array(rhs))
    derivs = [coef]
    for _ in range(2):
        derivs.append(np.polynomial.polynomial.polyder(derivs[-1]))
    scale = (1.0, 1.0 / L, 1.0 / (L * L))

    def ev(x, order: int = 0):
        t = (np.asarray(x, dtype=float) - x0) / L
        c = derivs[order]
        acc = np.full_like(t, c[-1])
        for cj in c[-2::-1]:
            acc = acc * t + cj
        return acc * scale[order]

    return ev


# -- construction from a modulus ----------------------------------------------------


class Primitive:
    """``Phi(x) = int_0^x omega(t) dt`` on ``[0, top]``.

    Cumulative values at geometric knots come from adaptive quadrature
    (QUADPACK); inside a knot cell the remainder is an 8-point
    Gauss-Legendre rule, which is exact to rounding on cells whose ends
    differ by at most 5%.  Below the first knot the power-law scaling
    ``Phi(x) ~ kappa * x * omega(x)`` is used.
    """

    def __init__(self, m: Modulus, top: float, first: float = 1e-20, ratio: float = 1.05):
        self.m = m
        self.top = float(top)
        n = int(math.ceil(math.log(top / first) / math.log(ratio)))
        knots = np.geomspace(first, top, n + 1)
        if m.knots is not None:
            knots = np.union1d(knots, m.knots[(m.knots > first) & (m.knots < top)])
        knots[-1] = top
        self.knots = knots
        w = m._raw
        head, _ = integrate.quad(lambda t: float(w(np.asarray(t))), 0.0, first, epsabs=0.0, epsrel=1e-13)
        cells = np.array([
            integrate.quad(lambda t: float(w(np.asarray(t))), a, b, epsabs=0.0, epsrel=1e-13, limit=100)[0]
            for a, b in zip(knots[:-1], knots[1:])
        ])
        self.table = np.concatenate(([head], head + np.cumsum(cells)))
        w0 = float(w(np.asarray(first)))
        self.kappa = head / (first * w0) if w0 > 0 else 0.5

    def __call__(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, 0.0, self.top)
        j = np.clip(np.searchsorted(self.knots, xc, side="right") - 1, 0, self.knots.size - 1)
        base = self.knots[j]
        inner = self.table[j] + gauss_legendre(self.m._raw, base, np.maximum(xc, base))
        tiny = self.kappa * xc * self.m._raw(np.minimum(xc, self.top))
        return np.where(xc < self.knots[0], tiny, inner)


def from_modulus(m: Modulus, epsilon: float, sign: str = "contracting") -> Diffeo:
    """``f0(x) = x -/+ int_0^x omega`` on ``[0, epsilon]``, its mirror image on
    ``[1-epsilon, 1]`` and a quintic bridge in between.

    The bridge matches value, first and second derivative of the
    displacement at both joints; it is certified on a dense grid to keep
    ``f' > 0`` and to introduce no interior fixed point.
    """
    if not (0.0 < epsilon < 0.5):
        raise ConstructionError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    if epsilon > m.domain_end:
        raise ConstructionError("epsilon exceeds the modulus domain")
    w_eps = float(m(epsilon))
    if w_eps >= 1.0:
        raise ConstructionError(f"omega(epsilon) = {w_eps:.6g} >= 1, so f0' = 1 - omega is not positive")
    if sign not in ("contracting", "expanding"):
        raise ConstructionError(f"unknown sign {sign!r}")
    s = -1.0 if sign == "contracting" else 1.0
    phi = Primitive(m, epsilon)
    p_eps = float(phi(np.asarray(epsilon)))
    dw_eps = float(m.deriv(epsilon))
    bridge = _hermite_poly(epsilon, 1.0 - epsilon, (p_eps, w_eps, dw_eps), (p_eps, -w_eps, dw_eps))
    w = m._raw

    def D(x):
        x = np.asarray(x, dtype=float)
        u = np.where(x <= 0.5, x, 1.0 - x)
        near = u <= epsilon
        out = np.empty_like(x)
        out[near] = phi(u[near])
        out[~near] = bridge(x[~near])
        return out

    def Dprime(x):
        x = np.asarray(x, dtype=float)
        u = np.where(x <= 0.5, x, 1.0 - x)
        near = u <= epsilon
        out = np.empty_like(x)
        out[near] = np.where(x[near] <= 0.5, 1.0, -1.0) * w(np.maximum(u[near], 0.0))
        out[~near] = bridge(x[~near], 1)
        return out

    def func(x):
        x = np.asarray(x, dtype=float)
        return x + s * D(x)

    def fprime(x):
        return 1.0 + s * Dprime(x)

    def logfp(x):
        return np.log1p(s * Dprime(x))

    def disp(x):
        return s * D(x)

    xs = np.linspace(0.0, 1.0, CERT_POINTS + 1)
    inner = xs[1:-1]
    if np.any(D(inner) <= 0):
        raise ConstructionError("bridge introduces an interior fixed point")
    fp = fprime(xs)
    if np.any(fp <= 0):
        raise ConstructionError("bridge is not monotone")
    return Diffeo(
        func, fprime, disp, logfp,
        fixed_points=(0.0, 1.0),
        description={"constructor": "from_modulus", "modulus": m.label(), "epsilon": epsilon,
                     "sign": sign, "min_fprime": float(fp.min()), "max_fprime": float(fp.max())},
        window=(0.0, float(epsilon)),
    )


# -- the oscillating sharpness family ----------------------------------------------


def _sharp_parts(m: Modulus, eps: float):
    """Closed forms of ``f_eps`` pieces on its window.

    ``f_eps(x) = x/(1+x) + x^(2+eps) omega(x) sin(2 pi/x)``.
    Returns ``(disp, fprime_minus_one)`` closures.
    """
    w = m._raw
    dw = m.deriv

    def disp(x):
        x = np.asarray(x, dtype=float)
        pos = x > 0
        xs = np.where(pos, x, 1.0)
        sn, _ = sincos_two_pi_over(xs)
        osc = xs ** (2.0 + eps) * w(np.minimum(xs, m.domain_end)) * sn
        return np.where(pos, -xs * xs / (1.0 + xs) + osc, 0.0)

    def fpm1(x):
        x = np.asarray(x, dtype=float)
        pos = x > 0
        xs = np.where(pos, x, 1.0)
        xd = np.minimum(xs, m.domain_end)
        sn, cs = sincos_two_pi_over(xs)
        wx = w(xd)
        amp_d = (2.0 + eps) * xs ** (1.0 + eps) * wx + xs ** (2.0 + eps) * dw(xd)
        val = -xs * (2.0 + xs) / (1.0 + xs) ** 2 + amp_d * sn - 2.0 * np.pi * xs ** eps * wx * cs
        return np.where(pos, val, 0.0)

    return disp, fpm1


def estimate_derivative_modulus(f: Diffeo, delta_grid, x_grid_size: int = CERT_POINTS,
                                window: tuple[float, float] = (0.0, 1.0)) -> tuple[Array, Array]:
    """Empirical modulus of continuity of ``f'`` on a uniform grid.

    ``omega_hat(delta) = max |f'(x) - f'(y)|`` over grid pairs with
    ``|x - y| <= delta``; computed with sliding-window max/min filters, which
    is exact for the sampled grid.
    """
    deltas = np.atleast_1d(np.asarray(delta_grid, dtype=float))
    if deltas.size == 0 or x_grid_size < 2:
        raise ValueError("need a non-empty delta grid and at least two x points")
    lo, hi = window
    x = np.linspace(lo, hi, x_grid_size)
    h = (hi - lo) / (x_grid_size - 1)
    v = np.asarray(f.fprime(x), dtype=float)
    out = np.zeros_like(deltas)
    for i, d in enumerate(deltas):
        span = int(math.floor(d / h * (1 + 1e-12)))
        if span <= 0:
            continue
        size = min(span + 1, v.size)
        mx = ndimage.maximum_filter1d(v, size=size, mode="nearest")
        mn = ndimage.minimum_filter1d(v, size=size, mode="nearest")
        out[i] = float(np.max(mx - mn))
    return deltas, out


def membership_constant(f: Diffeo, m: Modulus, delta_grid, x_grid_size: int = CERT_POINTS,
                        window: tuple[float, float] = (0.0, 1.0)) -> float:
    """``max_delta omega_hat_{f'}(delta) / omega(delta)``; ``inf`` flags a
    failure of membership at the scan resolution."""
    deltas, est = estimate_derivative_modulus(f, delta_grid, x_grid_size, window)
    ref = m(np.minimum(deltas, m.domain_end))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(est > 0, est / ref, 0.0)
    ratio = np.where(np.isnan(ratio), np.inf, ratio)
    return float(ratio.max())


def _dyadic_floor(v: float) -> float:
    return 2.0 ** math.floor(math.log2(v))


def sharpness_family(m: Modulus, epsilon: float, k_min: int = 32, c_abs: float = 1000.0,
                     check_hypothesis: bool = True) -> Diffeo:
    """The oscillating map ``f_eps`` on ``[0, a(eps)]``, extended to [0, 1].

    ``a(eps)`` starts at the largest dyadic value ``<= 1/k_min`` and is halved
    until a grid of ``2**14`` points certifies ``f' > 0``, no fixed point in
    ``(0, a]`` and ``omega_hat_{f'} <= c_abs * omega``.  The extension to
    ``[a, 1]`` is a cubic Hermite bridge of the displacement ending at a
    parabolic fixed point at 1 (``f(1) = f'(1) = 1``).
    """
    if not (0.0 < epsilon < 1.0):
        raise ConstructionError(f"epsilon must lie in (0, 1), got {epsilon}")
    if k_min < 2:
        raise ConstructionError("k_min must be >= 2")
    if check_hypothesis and classify_regularity(m).alpha_monotone is None:
        raise ConstructionError(f"{m.label()} fails the omega(x)/x^alpha decreasing hypothesis")
    disp0, fpm1 = _sharp_parts(m, epsilon)

    a = min(_dyadic_floor(1.0 / k_min), _dyadic_floor(m.domain_end))
    cert = None
    while a >= 1e-6:
        xs = np.linspace(0.0, a, CERT_POINTS + 1)
        fp = 1.0 + fpm1(xs)
        dv = disp0(xs[1:])
        window_map = Diffeo(lambda x: x + disp0(x), lambda x: 1.0 + fpm1(x), disp0)
        h = a / CERT_POINTS
        deltas = np.geomspace(2 * h, a, 40)
        c_meas = membership_constant(window_map, m, deltas, CERT_POINTS + 1, (0.0, a))
        if fp.min() > 0 and dv.max() < 0 and c_meas <= c_abs:
            cert = {"min_fprime": float(fp.min()), "max_disp": float(dv.max()), "membership_C": c_meas}
            break
        a *= 0.5
    if cert is None:
        raise ConstructionError(f"no certified window a(eps) >= 1e-6 for eps={epsilon}")

    d_a = float(disp0(np.asarray(a)))
    s_a = float(fpm1(np.asarray(a)))
    bridge = _hermite_poly(a, 1.0, (d_a, s_a), (0.0, 0.0))

    def disp(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= a, disp0(np.minimum(x, a)), bridge(np.clip(x, a, 1.0)))

    def dm1(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= a, fpm1(np.minimum(x, a)), bridge(np.clip(x, a, 1.0), 1))

    xs = np.linspace(a, 1.0, CERT_POINTS + 1)
    if np.any(dm1(xs) <= -1.0) or np.any(disp(xs[:-1]) >= 0):
        raise ConstructionError("extension bridge failed certification")

    return Diffeo(
        func=lambda x: np.asarray(x, dtype=float) + disp(x),
        fprime=lambda x: 1.0 + dm1(x),
        disp=disp,
        log_fprime=lambda x: np.log1p(dm1(x)),
        fixed_points=(0.0, 1.0),
        description={"constructor": "sharpness", "modulus": m.label(), "epsilon": epsilon,
                     "k_min": k_min, "a_eps": a, "c_abs": c_abs, **cert},
        window=(0.0, a),
    )


# -- pasting ------------------------------------------------------------------------


@dataclass(frozen=True)
class Block:
    a: float
    b: float
    base: Diffeo
    epsilon: float

    @property
    def width(self) -> float:
        if self.base.window is None:
            raise SpecError("block base map has no construction window")
        return self.base.window[1]


@dataclass(frozen=True)
class PastedSpec:
    """Blocks ``[a_k, b_k]`` ordered right to left (``b_{k+1} < a_k``)."""

    blocks: tuple[Block, ...] = ()

    def validate(self):
        prev = None
        for blk in self.blocks:
            if not (0.0 <= blk.a < blk.b <= 1.0):
                raise SpecError(f"block [{blk.a}, {blk.b}] is not a sub-interval of [0, 1]")
            if blk.a + blk.width >= blk.b:
                raise SpecError(f"base window {blk.width} does not fit in [{blk.a}, {blk.b}]")
            if prev is not None and not (blk.b < prev.a and blk.a < prev.a):
                raise SpecError("blocks overlap or are not ordered right to left")
            prev = blk


def paste(spec: PastedSpec, glue_points: int = 2 ** 12) -> Diffeo:
    """Identity outside the blocks; on block k the translated base map on
    ``[a_k, a_k + a(eps_k)]`` followed by a cubic glue ``Psi_k`` up to ``b_k``.

    The glue interpolates the displacement with cubic Hermite data
    (value and slope of the base map at the joint, zero value and slope at
    ``b_k``), so ``Psi_k(b_k) = b_k`` and ``Psi_k'(b_k) = 1``.  It is checked
    for monotonicity, absence of fixed points and ``|Psi_k''| <= 1``.
    """
    spec.validate()
    pieces = []
    for blk in spec.blocks:
        c = blk.a + blk.width
        d0 = float(blk.base.disp(np.asarray(blk.width)))
        s0 = float(blk.base.fprime(np.asarray(blk.width))) - 1.0
        glue = _hermite_poly(c, blk.b, (d0, s0), (0.0, 0.0))
        xs = np.linspace(c, blk.b, glue_points + 1)
        gv, g1, g2 = glue(xs), glue(xs, 1), glue(xs, 2)
        if np.any(1.0 + g1 <= 0):
            raise ConstructionError(f"glue on [{c:.6g}, {blk.b:.6g}] is not monotone")
        if np.any(gv[:-1] * np.sign(d0) <= 0):
            raise ConstructionError(f"glue on [{c:.6g}, {blk.b:.6g}] has a fixed point")
        if np.max(np.abs(g2)) > 1.0:
            raise ConstructionError(
                f"glue on [{c:.6g}, {blk.b:.6g}] needs |Psi''| = {np.max(np.abs(g2)):.3g} > 1; widen the block")
        pieces.append((blk, c, glue))

    def parts(x):
        x = np.asarray(x, dtype=float)
        d = np.zeros_like(x)
        dm1 = np.zeros_like(x)
        for blk, c, glue in pieces:
            in_base = (x >= blk.a) & (x <= c)
            in_glue = (x > c) & (x < blk.b)
            u = np.clip(x - blk.a, 0.0, blk.width)
            if in_base.any():
                d = np.where(in_base, blk.base.disp(u), d)
                dm1 = np.where(in_base, blk.base.fprime(u) - 1.0, dm1)
            if in_glue.any():
                xc = np.clip(x, c, blk.b)
                gv, g1 = glue(xc), glue(xc, 1)
                d = np.where(in_glue, gv, d)
                dm1 = np.where(in_glue, g1, dm1)
        return d, dm1

    ends = sorted({0.0, 1.0, *(blk.a for blk in spec.blocks), *(blk.b for blk in spec.blocks)})
    return Diffeo(
        func=lambda x: np.asarray(x, dtype=float) + parts(x)[0],
        fprime=lambda x: 1.0 + parts(x)[1],
        disp=lambda x: parts(x)[0],
        log_fprime=lambda x: np.log1p(parts(x)[1]),
        fixed_points=tuple(ends),
        description={"constructor": "pasted",
                     "blocks": [(blk.a, blk.b, blk.epsilon, blk.width) for blk in spec.blocks]},
    )


# -- lemma-level checks on the construction window ------------------------------------


def claim1_ratio_bounds(f: Diffeo, lo: float, hi: float, n_x: int = 400, n_y: int = 9):
    """Range of ``phi(x)/phi(y)`` for ``x`` in ``(lo, hi]`` and ``y`` between
    ``x`` and ``f(x)``, with the bracket ``[1/max(1,A), 1/min(1,a)]`` built
    from ``A = max f'``, ``a = min f'`` over the window."""
    xs = np.linspace(lo, hi, n_x + 1)[1:]
    fx = f.func(xs)
    theta = np.linspace(0.0, 1.0, n_y)
    ys = xs[:, None] + theta[None, :] * (fx - xs)[:, None]
    ratio = f.disp(xs)[:, None] / f.disp(ys)
    grid = np.linspace(lo, max(hi, float(fx.max())), 4 * n_x + 1)
    fp = f.fprime(grid)
    A, a = float(fp.max()), float(fp.min())
    return float(ratio.min()), float(ratio.max()), 1.0 / max(1.0, A), 1.0 / min(1.0, a)


def claim2_margins(f: Diffeo, m: Modulus, delta: float, n_x: int = 200, n_y: int = 41):
    """Worst margins in ``|phi'(y)| <= 3 omega(Omega(|phi(x)|))`` and
    ``|phi(y)/phi(x)| <= 4`` over ``x`` in ``(0, delta]`` and ``y`` in
    ``I_x = [x - Omega(|phi(x)|), x + Omega(|phi(x)|)]``.

    Returns ``(max deriv ratio / 3, max value ratio / 4, points used)``;
    both ratios are ``<= 1`` when the claim holds.
    """
    window = f.window or (0.0, 1.0)
    xs = np.geomspace(delta * 1e-6, delta, n_x)
    ph = np.abs(f.disp(xs))
    cap = np.asarray(m.omega_cap(np.minimum(ph, m.domain_end * float(m(m.domain_end)))))
    keep = (xs - cap >= window[0]) & (xs + cap <= window[1]) & (ph > 0)
    xs, ph, cap = xs[keep], ph[keep], cap[keep]
    if xs.size == 0:
        return math.nan, math.nan, 0
    t = np.linspace(-1.0, 1.0, n_y)
    ys = xs[:, None] + t[None, :] * cap[:, None]
    dphi = np.abs(f.fprime(ys) - 1.0)
    lhs = dphi / (3.0 * m._raw(cap))[:, None]
    val = np.abs(f.disp(ys)) / ph[:, None] / 4.0
    return float(lhs.max()), float(val.max()), int(xs.size)
