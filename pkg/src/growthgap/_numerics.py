"""Low level numerical kernels: error-free transforms, compensated sums,
vectorised bisection and a fixed Gauss-Legendre rule."""

from __future__ import annotations

import numpy as np

_SPLITTER = 134217729.0  # 2**27 + 1

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def two_sum(a, b):
    """Knuth's TwoSum: ``s + e == a + b`` exactly."""
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return s, e


def _split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def two_prod(a, b):
    """Dekker's TwoProduct: ``p + e == a * b`` exactly while ``a * b`` neither
    overflows nor underflows."""
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def neumaier_add(s, c, v):
    """One step of Neumaier's compensated summation on arrays.

    Returns the new running sum and compensation; the compensated value
    is ``s + c``.
    """
    t = s + v
    c = c + np.where(np.abs(s) >= np.abs(v), (s - t) + v, (v - t) + s)
    return t, c


def compensated_cumsum(values) -> np.ndarray:
    """Prefix sums with Neumaier compensation."""
    values = np.asarray(values, dtype=float)
    out = np.empty_like(values)
    s = 0.0
    c = 0.0
    for i, v in enumerate(values):
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        out[i] = s + c
    return out


def reciprocal_fraction(x):
    """Fractional part of ``1/x`` for ``0 < x``, computed without the
    rounding error of forming ``1/x`` first.

    ``1/x = q + r`` with ``q = floor(fl(1/x))``; the remainder ``1 - q*x`` is
    evaluated exactly through TwoProduct, so ``r`` keeps full relative
    accuracy even when ``1/x`` is huge.  Valid for ``1e-300 <= x``.
    """
    x = np.asarray(x, dtype=float)
    q = np.floor(1.0 / x)
    p, e = two_prod(q, x)
    num = (1.0 - p) - e
    return num / x


def sincos_two_pi_over(x):
    """``sin(2*pi/x)`` and ``cos(2*pi/x)`` with exact argument reduction.

    Entries with ``x < 1e-300`` (where the reduction would overflow) return 0
    for both; callers multiply them by factors that underflow there anyway.
    """
    x = np.asarray(x, dtype=float)
    ok = x >= 1e-300
    safe = np.where(ok, x, 1.0)
    theta = 2.0 * np.pi * reciprocal_fraction(safe)
    s = np.where(ok, np.sin(theta), 0.0)
    c = np.where(ok, np.cos(theta), 0.0)
    return s, c


def bisect_increasing(fun, y, lo, hi, max_iter: int = 1100):
    """Vectorised bisection for ``fun(x) = y`` with ``fun`` non-decreasing.

    Iterates until the bracket cannot be split in floating point (the
    default cap is enough to reach subnormal roots from ``[0, 1]``), then
    returns whichever bracket end has the smaller residual.
    """
    y = np.asarray(y, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), y.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), y.shape).copy()
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        active = (mid > lo) & (mid < hi)
        if not active.any():
            break
        below = fun(mid) < y
        lo = np.where(active & below, mid, lo)
        hi = np.where(active & ~below, mid, hi)
    r_lo = np.abs(fun(lo) - y)
    r_hi = np.abs(fun(hi) - y)
    return np.where(r_lo <= r_hi, lo, hi)


def gauss_legendre(fun, a, b):
    """8-point Gauss-Legendre rule on each interval ``[a, b]`` (vectorised)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    pts = mid[..., None] + half[..., None] * GL_NODES
    return half * (fun(pts) @ GL_WEIGHTS)


def scalar_or_array(value, like):
    """Return a Python float when the caller passed a scalar."""
    if np.ndim(like) == 0:
        return float(value)
    return value


def newton_bisect_increasing(fun, dfun, y, lo, hi, x0=None, max_iter: int = 200):
    """Safeguarded Newton iteration for ``fun(x) = y`` with ``fun`` increasing.

    Each step keeps a bracket ``[lo, hi]``; a Newton step that leaves it is
    replaced by the midpoint.  Elements stop once the residual vanishes or
    the bracket collapses to adjacent floats.
    """
    y = np.asarray(y, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), y.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), y.shape).copy()
    x = np.clip(y if x0 is None else np.asarray(x0, dtype=float), lo, hi).copy()
    idx = np.arange(y.size)
    xf, yf, lof, hif = x.ravel(), y.ravel(), lo.ravel(), hi.ravel()
    best = xf.copy()
    best_r = np.full(y.size, np.inf)
    for _ in range(max_iter):
        if idx.size == 0:
            break
        xi = xf[idx]
        r = fun(xi) - yf[idx]
        ar = np.abs(r)
        improve = ar < best_r[idx]
        best[idx[improve]] = xi[improve]
        best_r[idx[improve]] = ar[improve]
        lof[idx] = np.where(r < 0, xi, lof[idx])
        hif[idx] = np.where(r > 0, xi, hif[idx])
        lo_i, hi_i = lof[idx], hif[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            step = xi - r / dfun(xi)
        mid = 0.5 * (lo_i + hi_i)
        nxt = np.where((step > lo_i) & (step < hi_i) & np.isfinite(step), step, mid)
        done = (r == 0) | (nxt == xi) | ~((mid > lo_i) & (mid < hi_i))
        xf[idx] = nxt
        idx = idx[~done]
    return best.reshape(y.shape)
