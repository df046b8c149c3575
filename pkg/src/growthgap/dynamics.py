"""Iteration, chain-rule products and growth sequences.

``Gamma_n(f) = max(sup (f^n)', sup (f^-n)')`` is handled in the log domain.
Because ``(f^-n)'(y) = 1/(f^n)'(f^-n(y))`` and ``f^n`` is onto, the inverse
branch equals ``-inf log (f^n)'``, so only forward orbits are needed.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from ._numerics import neumaier_add
from .diffeo import FREEZE_TOL, Diffeo
from .errors import InvalidDiffeoError, SingularIntegralError, SpecError
from .modulus import Modulus


@dataclass(frozen=True)
class Trajectory:
    points: np.ndarray
    log_deriv_prefix: np.ndarray

    @property
    def n(self) -> int:
        return self.points.size - 1


@dataclass(frozen=True)
class GrowthRecord:
    n: int
    log_gamma: float
    log_sup: float
    log_inf: float
    arg_sup: float
    arg_inf: float


@dataclass(frozen=True)
class GridSpec:
    """Probe layout for :func:`growth_sequence`.

    ``size`` base points: both endpoints, log-spaced points within
    ``[edge_min, edge_max]`` of each endpoint and a uniform interior.
    ``refine`` is the equivalent number of ternary-search steps spent
    around the current extremisers at every doubling of ``n``.
    ``orbit_closed`` adds every orbit point ``f^j(x)`` of every probe to the
    probed set (cost grows like ``size * n_max**2``).
    """

    size: int = 4096
    refine: int = 40
    edge_min: float = 1e-15
    edge_max: float = 0.1
    edge_fraction: float = 0.25
    orbit_closed: bool = False

    def points(self, fixed_points: Sequence[float] = (0.0, 1.0)) -> np.ndarray:
        """Probe start points; log-spaced clusters sit on each side of every
        fixed point, since orbits slow down and derivatives pile up there."""
        if self.size < 8:
            raise SpecError("grid size must be at least 8")
        fixed = sorted({float(v) for v in fixed_points} | {0.0, 1.0})
        sides = [(xi, sgn) for xi in fixed for sgn in (-1.0, 1.0) if 0.0 <= xi + sgn * self.edge_min <= 1.0]
        n_edge = max(2, int(self.size * 2 * self.edge_fraction) // len(sides))
        near = np.geomspace(self.edge_min, self.edge_max, n_edge)
        clusters = [xi + sgn * near for xi, sgn in sides]
        n_mid = max(0, self.size - len(fixed) - n_edge * len(sides))
        mid = np.linspace(0.0, 1.0, n_mid + 2)[1:-1]
        pts = np.concatenate([np.asarray(fixed), mid, *clusters])
        return np.unique(pts[(pts >= 0.0) & (pts <= 1.0)])


def _freeze(x: np.ndarray, fixed: Sequence[float]) -> np.ndarray:
    for xi in fixed:
        x = np.where(np.abs(x - xi) <= FREEZE_TOL, xi, x)
    return x


def _log_step(f: Diffeo, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lg = f.log_deriv(x)
    if not np.all(np.isfinite(lg)):
        bad = x[~np.isfinite(lg)][0]
        raise InvalidDiffeoError(f"non-positive or infinite derivative at x={bad!r} along an orbit")
    return lg, f.func(x)


def orbit(f: Diffeo, x0: float, n: int) -> Trajectory:
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0.0 <= x0 <= 1.0):
        raise ValueError("x0 must lie in [0, 1]")
    pts = np.empty(n + 1)
    pref = np.empty(n + 1)
    pts[0] = x0
    pref[0] = 0.0
    s, c = np.zeros(1), np.zeros(1)
    x = np.array([float(x0)])
    for k in range(n):
        lg, nx = _log_step(f, x)
        s, c = neumaier_add(s, c, lg)
        pref[k + 1] = s[0] + c[0]
        x = _freeze(nx, f.fixed_points)
        pts[k + 1] = x[0]
    return Trajectory(pts, pref)


def log_deriv_product(f: Diffeo, x, n: int):
    """``log (f^n)'(x)`` as a compensated sum over the orbit; vectorised in x."""
    if n < 0:
        raise ValueError("n must be >= 0")
    xa = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    s, c = np.zeros_like(xa), np.zeros_like(xa)
    for _ in range(n):
        lg, nx = _log_step(f, xa)
        s, c = neumaier_add(s, c, lg)
        xa = _freeze(nx, f.fixed_points)
    out = s + c
    return float(out[0]) if np.ndim(x) == 0 else out


def iterate(f: Diffeo, x, n: int):
    xa = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    for _ in range(n):
        xa = _freeze(f.func(xa), f.fixed_points)
    return float(xa[0]) if np.ndim(x) == 0 else xa


def _resolve_workers(workers: int | None) -> int:
    env = os.environ.get("GROWTHGAP_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise SpecError(f"GROWTHGAP_WORKERS must be an integer, got {env!r}") from None
    return max(1, int(workers or 1))


class _Stepper:
    """Advance a batch of probes by one step, optionally chunked over threads.

    Every probe is updated elementwise, so the result does not depend on
    the number of workers.
    """

    def __init__(self, f: Diffeo, workers: int):
        self.f = f
        self.workers = workers
        self.pool = ThreadPoolExecutor(workers) if workers > 1 else None

    def __call__(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.pool is None or x.size < 4 * self.workers:
            return _log_step(self.f, x)
        chunks = np.array_split(x, self.workers)
        parts = list(self.pool.map(lambda ch: _log_step(self.f, ch), chunks))
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def _advance(stepper: _Stepper, x: np.ndarray, n: int):
    s, c = np.zeros_like(x), np.zeros_like(x)
    for _ in range(n):
        lg, nx = stepper(x)
        s, c = neumaier_add(s, c, lg)
        x = _freeze(nx, stepper.f.fixed_points)
    return x, s, c


REFINE_POINTS = 64


def refine_rounds(refine: int) -> int:
    """Rounds of :func:`_refine` matching ``refine`` ternary-search steps.

    A ternary step shrinks a bracket by 1.5; a round with ``REFINE_POINTS``
    interior samples shrinks it by ``(REFINE_POINTS + 1) / 2``.
    """
    if refine <= 0:
        return 0
    return int(math.ceil(refine * math.log(1.5) / math.log((REFINE_POINTS + 1) / 2)))


def _bracket(xs: np.ndarray, x: float) -> tuple[float, float]:
    k = int(np.searchsorted(xs, x))
    return float(xs[max(k - 1, 0)]), float(xs[min(k + 1, xs.size - 1)])


def _refine(stepper: _Stepper, x0: np.ndarray, total: np.ndarray, n: int, rounds: int):
    """Zoom in on the current arg sup and arg inf of ``log (f^n)'``.

    Both brackets are sampled together; each round keeps the neighbours of
    the best sample seen so far.  Returns the new probes and their states.
    """
    order = np.argsort(x0, kind="stable")
    xs, vals = x0[order], total[order]
    targets = []
    for sign, i in ((1.0, int(np.argmax(vals))), (-1.0, int(np.argmin(vals)))):
        lo, hi = float(xs[max(i - 1, 0)]), float(xs[min(i + 1, xs.size - 1)])
        targets.append([sign, float(xs[i]), float(vals[i]), lo, hi])
    out = []
    for _ in range(rounds):
        cands = []
        for sign, bx, bv, lo, hi in targets:
            c = np.linspace(lo, hi, REFINE_POINTS + 2)[1:-1]
            cands.append(c[(c > lo) & (c < hi)])
        sizes = [c.size for c in cands]
        if sum(sizes) == 0:
            break
        start = np.concatenate(cands)
        xe, s, c = _advance(stepper, start.copy(), n)
        out.append((start, xe, s, c))
        v = s + c
        off = 0
        for t, cand, size in zip(targets, cands, sizes):
            sign, bx, bv, lo, hi = t
            if size:
                vv = sign * v[off:off + size]
                j = int(np.argmax(vv))
                if vv[j] > sign * bv:
                    bx, bv = float(cand[j]), float(v[off + j])
                pts = np.unique(np.concatenate(([lo, hi, bx], cand)))
                lo, hi = _bracket(pts, bx)
            t[:] = [sign, bx, bv, lo, hi]
            off += size
    if not out:
        return None
    return tuple(np.concatenate([o[k] for o in out]) for k in range(4))


def growth_sequence(f: Diffeo, n_max: int, grid: GridSpec | None = None,
                    workers: int | None = None) -> list[GrowthRecord]:
    """Records ``Gamma_n`` for ``n = 1..n_max`` from incrementally advanced probes.

    At every power of two ``n >= 4`` the probe set is enlarged around the
    current extremisers (see :func:`_refine`), so later records use the
    re-seeded grid.  Records are grid extrema: lower bounds on the true
    ``sup`` and upper bounds on the true ``inf``.

    With ``grid.orbit_closed`` the final probe set is replayed with full
    history and ``Gamma_n`` is maximised over all points ``f^j(x)`` with
    ``j + n <= n_max``.  That set is mapped into itself by ``f`` within the
    horizon, so the chain rule makes the recorded values exactly
    submultiplicative.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    grid = grid or GridSpec()
    x0 = grid.points(f.fixed_points)
    x = x0.copy()
    s, c = np.zeros_like(x), np.zeros_like(x)
    rounds = refine_rounds(grid.refine)
    stepper = _Stepper(f, _resolve_workers(workers))
    records: list[GrowthRecord] = []
    try:
        for n in range(1, n_max + 1):
            lg, nx = stepper(x)
            s, c = neumaier_add(s, c, lg)
            x = _freeze(nx, f.fixed_points)
            if rounds and n >= 4 and (n & (n - 1)) == 0:
                extra = _refine(stepper, x0, s + c, n, rounds)
                if extra is not None:
                    x0 = np.concatenate((x0, extra[0]))
                    x = np.concatenate((x, extra[1]))
                    s = np.concatenate((s, extra[2]))
                    c = np.concatenate((c, extra[3]))
            total = s + c
            i_sup = int(np.argmax(total))
            i_inf = int(np.argmin(total))
            log_sup, log_inf = float(total[i_sup]), float(total[i_inf])
            records.append(GrowthRecord(n, max(log_sup, -log_inf, 0.0), log_sup, log_inf,
                                        float(x0[i_sup]), float(x0[i_inf])))
        if grid.orbit_closed:
            records = _closed_records(stepper, x0, n_max)
    finally:
        stepper.close()
    return records


def _closed_records(stepper: _Stepper, x0: np.ndarray, n_max: int) -> list[GrowthRecord]:
    p = x0.size
    pos = np.empty((p, n_max + 1))
    pref = np.zeros((p, n_max + 1))
    x = x0.copy()
    s, c = np.zeros(p), np.zeros(p)
    pos[:, 0] = x
    for k in range(n_max):
        lg, nx = stepper(x)
        s, c = neumaier_add(s, c, lg)
        x = _freeze(nx, stepper.f.fixed_points)
        pos[:, k + 1] = x
        pref[:, k + 1] = s + c
    out = []
    for n in range(1, n_max + 1):
        d = pref[:, n:] - pref[:, : n_max + 1 - n]
        i_sup = np.unravel_index(int(np.argmax(d)), d.shape)
        i_inf = np.unravel_index(int(np.argmin(d)), d.shape)
        log_sup, log_inf = float(d[i_sup]), float(d[i_inf])
        out.append(GrowthRecord(n, max(log_sup, -log_inf, 0.0), log_sup, log_inf,
                                float(pos[i_sup]), float(pos[i_inf])))
    return out


def orbit_records(f: Diffeo, x0: float, n_max: int) -> list[GrowthRecord]:
    """Records from the single orbit of ``x0``: ``|log (f^n)'(x0)|`` is a lower
    bound on ``log Gamma_n``."""
    traj = orbit(f, x0, n_max)
    out = []
    for n in range(1, n_max + 1):
        v = float(traj.log_deriv_prefix[n])
        out.append(GrowthRecord(n, abs(v), v, v, x0, x0))
    return out


def gamma_estimate(records: Sequence[GrowthRecord]) -> tuple[float, np.ndarray]:
    """``exp(log Gamma_N / N)`` at the last record, plus all nth roots."""
    if not records:
        raise ValueError("records must be non-empty")
    n = np.array([r.n for r in records], dtype=float)
    lg = np.array([r.log_gamma for r in records])
    roots = np.exp(lg / n)
    return float(roots[-1]), roots


def orbit_integral(f: Diffeo, x_a: float, x_b: float, rtol: float = 1e-10) -> float:
    """``int dt/|phi(t)|`` between ``x_a`` and ``x_b`` by adaptive quadrature."""
    lo, hi = min(x_a, x_b), max(x_a, x_b)
    if hi == lo:
        return 0.0
    probe = np.linspace(lo, hi, 1025)[1:-1]
    if np.any(f.disp(probe) == 0.0):
        raise SingularIntegralError("displacement vanishes inside the integration interval")
    val, err = integrate.quad(lambda t: 1.0 / abs(float(f.disp(np.asarray(t)))), lo, hi,
                              epsabs=0.0, epsrel=rtol, limit=400)
    if not math.isfinite(val):
        raise SingularIntegralError("integral diverges")
    return val


def claim9_profile(f: Diffeo, m: Modulus, x0: float, n_max: int) -> np.ndarray:
    """``n * omega(x_n)`` for ``n = 1..n_max`` along the orbit of ``x0``."""
    if f.description.get("constructor") != "from_modulus":
        raise SpecError("the n*omega(x_n) profile applies to maps built by from_modulus")
    if not (0.0 < x0 < 1.0) or float(f.disp(np.asarray(x0))) == 0.0:
        raise SpecError("x0 must be a point that actually moves")
    traj = orbit(f, x0, n_max)
    xn = traj.points[1:]
    n = np.arange(1, n_max + 1, dtype=float)
    return n * m(np.minimum(xn, m.domain_end))


def claim9_check(f: Diffeo, m: Modulus, x0: float, n_max: int) -> float:
    return float(np.max(claim9_profile(f, m, x0, n_max)))
