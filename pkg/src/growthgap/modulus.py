"""Moduli of continuity and the auxiliary functions built from them.

A :class:`Modulus` is an immutable, vectorised callable ``omega(delta)``
together with its inverse, the inverse ``Omega`` of ``x -> x*omega(x)``,
``Lambda(x) = x*omega(1/x)``, and a derivative used by the closed-form
constructions in :mod:`growthgap.diffeo`.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from ._numerics import bisect_increasing, scalar_or_array
from .errors import DomainError, InvalidModulusError

ALPHA_CANDIDATES = tuple(round(0.1 * k, 1) for k in range(1, 10))


class Kind(str, enum.Enum):
    HOLDER = "holder"
    LIPSCHITZ = "lipschitz"
    XLOG = "xlog"
    SQRTLOG = "sqrtlog"
    INVLOG = "invlog"
    TABULATED = "tabulated"


@dataclass(frozen=True, eq=False)
class Modulus:
    """A modulus of continuity on ``[0, domain_end]``.

    Built-in kinds (all multiplied by ``scale``)::

        holder     delta**alpha
        lipschitz  delta
        xlog       delta*log(e/delta)
        sqrtlog    delta*sqrt(log(e/delta))
        invlog     1/log(e/delta)
        tabulated  piecewise-linear through (knots, values)
    """

    kind: Kind
    alpha: float | None = None
    scale: float = 1.0
    domain_end: float = 1.0
    knots: np.ndarray | None = field(default=None, repr=False)
    values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if not (0.0 < self.domain_end <= 1.0):
            raise InvalidModulusError(f"domain_end must lie in (0, 1], got {self.domain_end}")
        if not self.scale > 0:
            raise InvalidModulusError(f"scale must be positive, got {self.scale}")
        if self.kind is Kind.HOLDER:
            if self.alpha is None or not (0.0 < self.alpha < 1.0):
                raise InvalidModulusError(f"holder exponent must lie in (0, 1), got {self.alpha}")
        if self.kind is Kind.TABULATED:
            if self.knots is None or self.values is None:
                raise InvalidModulusError("tabulated modulus needs knots and values")
            knots = np.array(self.knots, dtype=float)
            values = np.array(self.values, dtype=float)
            if knots.ndim != 1 or knots.shape != values.shape or knots.size < 2:
                raise InvalidModulusError("knots and values must be 1-d arrays of equal length >= 2")
            if knots[0] != 0.0 or values[0] != 0.0:
                raise InvalidModulusError("tabulated modulus must start at (0, 0)")
            if np.any(np.diff(knots) <= 0):
                raise InvalidModulusError("knots must be strictly increasing")
            if np.any(np.diff(values) < 0):
                raise InvalidModulusError("tabulated values must be non-decreasing")
            knots.setflags(write=False)
            values.setflags(write=False)
            object.__setattr__(self, "knots", knots)
            object.__setattr__(self, "values", values)
            object.__setattr__(self, "domain_end", float(knots[-1]))

    # -- constructors -----------------------------------------------------

    @classmethod
    def holder(cls, alpha: float, scale: float = 1.0, domain_end: float = 1.0) -> "Modulus":
        return cls(Kind.HOLDER, alpha=float(alpha), scale=scale, domain_end=domain_end)

    @classmethod
    def lipschitz(cls, scale: float = 1.0, domain_end: float = 1.0) -> "Modulus":
        return cls(Kind.LIPSCHITZ, scale=scale, domain_end=domain_end)

    @classmethod
    def xlog(cls, scale: float = 1.0, domain_end: float = 1.0) -> "Modulus":
        return cls(Kind.XLOG, scale=scale, domain_end=domain_end)

    @classmethod
    def sqrtlog(cls, scale: float = 1.0, domain_end: float = 1.0) -> "Modulus":
        return cls(Kind.SQRTLOG, scale=scale, domain_end=domain_end)

    @classmethod
    def invlog(cls, scale: float = 1.0, domain_end: float = 1.0) -> "Modulus":
        return cls(Kind.INVLOG, scale=scale, domain_end=domain_end)

    @classmethod
    def tabulated(cls, knots, values, scale: float = 1.0) -> "Modulus":
        knots = np.asarray(knots, dtype=float)
        return cls(Kind.TABULATED, scale=scale, knots=knots, values=np.asarray(values, dtype=float),
                   domain_end=float(knots[-1]) if knots.size and 0 < knots[-1] <= 1 else 1.0)

    @classmethod
    def from_csv(cls, path, scale: float = 1.0) -> "Modulus":
        """Read a two-column ``delta,value`` table (header optional)."""
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except ValueError:
                    if rows:
                        raise InvalidModulusError(f"bad row in {path}: {row}") from None
        if not rows:
            raise InvalidModulusError(f"no data rows in {path}")
        d, v = zip(*rows)
        return cls.tabulated(d, v, scale=scale)

    @classmethod
    def parse(cls, text: str, base_dir: Path | None = None) -> "Modulus":
        """Parse the short CLI form, e.g. ``holder:0.5``, ``invlog``,
        ``tabulated:table.csv``."""
        name, _, arg = text.partition(":")
        kind = Kind(name.strip().lower())
        if kind is Kind.HOLDER:
            if not arg:
                raise InvalidModulusError("holder needs an exponent, e.g. holder:0.5")
            return cls.holder(float(arg))
        if kind is Kind.TABULATED:
            path = Path(arg)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            return cls.from_csv(path)
        return cls(kind)

    @classmethod
    def from_config(cls, cfg: Mapping[str, str], base_dir: Path | None = None) -> "Modulus":
        """Build from ``modulus.*`` keys (prefix already stripped)."""
        kind = Kind(cfg.get("kind", "holder").strip().lower())
        scale = float(cfg.get("scale", 1.0))
        domain_end = float(cfg.get("domain_end", 1.0))
        if kind is Kind.TABULATED:
            path = Path(cfg["table"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            return cls.from_csv(path, scale=scale)
        alpha = float(cfg["alpha"]) if kind is Kind.HOLDER else None
        return cls(kind, alpha=alpha, scale=scale, domain_end=domain_end)

    def label(self) -> str:
        if self.kind is Kind.HOLDER:
            return f"holder:{self.alpha:g}"
        if self.kind is Kind.TABULATED:
            return f"tabulated[{self.knots.size}]"
        return self.kind.value

    # -- evaluation ---------------------------------------------------------

    def _check_domain(self, d) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        if np.any(~np.isfinite(d)) or np.any(d < 0) or np.any(d > self.domain_end * (1 + 1e-14)):
            raise DomainError(f"delta outside [0, {self.domain_end}]")
        return np.minimum(d, self.domain_end)

    def _raw(self, d: np.ndarray) -> np.ndarray:
        k = self.kind
        with np.errstate(divide="ignore", invalid="ignore"):
            if k is Kind.HOLDER:
                out = d ** self.alpha
            elif k is Kind.LIPSCHITZ:
                out = d.copy()
            elif k is Kind.XLOG:
                out = np.where(d > 0, d * (1.0 - np.log(d)), 0.0)
            elif k is Kind.SQRTLOG:
                out = np.where(d > 0, d * np.sqrt(1.0 - np.log(d)), 0.0)
            elif k is Kind.INVLOG:
                out = np.where(d > 0, 1.0 / (1.0 - np.log(d)), 0.0)
            else:
                out = np.interp(d, self.knots, self.values)
        return self.scale * out

    def __call__(self, delta):
        """``omega(delta)``; raises :class:`DomainError` outside the domain."""
        d = self._check_domain(delta)
        return scalar_or_array(self._raw(d), delta)

    eval = __call__

    def deriv(self, delta):
        """Right derivative ``omega'(delta)`` (``inf`` where it blows up at 0)."""
        d = self._check_domain(delta)
        k = self.kind
        with np.errstate(divide="ignore", invalid="ignore"):
            if k is Kind.HOLDER:
                out = np.where(d > 0, self.alpha * d ** (self.alpha - 1.0), np.inf)
            elif k is Kind.LIPSCHITZ:
                out = np.ones_like(d)
            elif k is Kind.XLOG:
                out = np.where(d > 0, -np.log(d), np.inf)
            elif k is Kind.SQRTLOG:
                L = 1.0 - np.log(np.where(d > 0, d, 1.0))
                out = np.where(d > 0, np.sqrt(L) - 0.5 / np.sqrt(L), np.inf)
            elif k is Kind.INVLOG:
                L = 1.0 - np.log(np.where(d > 0, d, 1.0))
                out = np.where(d > 0, 1.0 / (d * L * L), np.inf)
            else:
                slopes = np.diff(self.values) / np.diff(self.knots)
                idx = np.clip(np.searchsorted(self.knots, d, side="right") - 1, 0, slopes.size - 1)
                out = slopes[idx]
        return scalar_or_array(self.scale * out, delta)

    @property
    def strictly_increasing(self) -> bool:
        if self.kind is Kind.TABULATED:
            return bool(np.all(np.diff(self.values) > 0))
        return True

    def _require_increasing(self):
        if not self.strictly_increasing:
            raise InvalidModulusError("operation needs a strictly increasing modulus")

    def inverse(self, y):
        """``omega^{-1}(y)`` by bisection; values at or above ``omega(domain_end)``
        are clamped to ``domain_end``."""
        self._require_increasing()
        y_arr = np.asarray(y, dtype=float)
        if np.any(~np.isfinite(y_arr)) or np.any(y_arr < 0):
            raise DomainError("inverse needs a non-negative finite argument")
        top = float(self._raw(np.asarray(self.domain_end)))
        target = np.minimum(y_arr, top)
        x = bisect_increasing(self._raw, target, 0.0, self.domain_end)
        x = np.where(y_arr >= top, self.domain_end, np.where(y_arr == 0, 0.0, x))
        return scalar_or_array(x, y)

    def omega_cap(self, z):
        """``Omega(z)``: the inverse of ``x -> x*omega(x)`` on ``[0, domain_end]``."""
        self._require_increasing()
        z_arr = np.asarray(z, dtype=float)
        top = self.domain_end * float(self._raw(np.asarray(self.domain_end)))
        if np.any(~np.isfinite(z_arr)) or np.any(z_arr < 0) or np.any(z_arr > top * (1 + 1e-14)):
            raise DomainError(f"Omega is defined on [0, {top}]")
        x = bisect_increasing(lambda t: t * self._raw(t), np.minimum(z_arr, top), 0.0, self.domain_end)
        return scalar_or_array(np.where(z_arr == 0, 0.0, x), z)

    def lam(self, x):
        """``Lambda(x) = x*omega(1/x)`` for ``x >= max(1, 1/domain_end)``."""
        x_arr = np.asarray(x, dtype=float)
        if np.any(x_arr < 1.0) or np.any(1.0 / x_arr > self.domain_end * (1 + 1e-14)):
            raise DomainError("Lambda needs x >= 1 and 1/x <= domain_end")
        return scalar_or_array(x_arr * self._raw(np.minimum(1.0 / x_arr, self.domain_end)), x)


# -- concave majorant ---------------------------------------------------------


def _upper_hull(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Indices of the upper convex hull of points sorted by x."""
    hull: list[int] = []
    for i in range(xs.size):
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (xs[a] - xs[o]) * (ys[i] - ys[o]) - (ys[a] - ys[o]) * (xs[i] - xs[o])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.asarray(hull)


def majorant_grid(m: Modulus, grid_size: int, decades: float = 12.0) -> np.ndarray:
    """Log-spaced sample grid on ``[0, domain_end]`` (0 included), merged with
    the knots of a tabulated modulus."""
    if grid_size < 3:
        raise DomainError("grid_size must be >= 3")
    D = m.domain_end
    grid = np.concatenate(([0.0], np.geomspace(D * 10.0 ** (-decades), D, grid_size - 1)))
    if m.kind is Kind.TABULATED:
        grid = np.union1d(grid, m.knots)
    grid[-1] = D
    return grid


def concave_majorant(m: Modulus, grid_size: int = 4096, decades: float = 12.0) -> Modulus:
    """Least concave majorant of ``m`` sampled on :func:`majorant_grid`,
    returned as a tabulated modulus on the same grid."""
    xs = majorant_grid(m, grid_size, decades)
    ys = m._raw(xs)
    hull = _upper_hull(xs, ys)
    star = np.interp(xs, xs[hull], ys[hull])
    star = np.maximum(np.maximum.accumulate(star), ys)
    star[0] = 0.0
    return Modulus.tabulated(xs, star)


# -- regularity classification ----------------------------------------------------


@dataclass(frozen=True)
class RegularityReport:
    """Grid-certified regularity properties of a modulus.

    ``alpha_monotone`` / ``alpha_increasing`` hold ``(alpha, a(alpha))`` pairs
    or ``None``; the ``*_candidates`` maps list every certified exponent.
    """

    alpha_monotone: tuple[float, float] | None
    alpha_increasing: tuple[float, float] | None
    ratio_over_x_decreasing: bool
    xlog_limit_class: str
    monotone_candidates: dict[float, float]
    increasing_candidates: dict[float, float]
    xlog_tail_slope: float
    claim4_holds: bool | None
    claim4_min_ratio: float | None
    scan_resolution: int
    scan_range: tuple[float, float]

    @property
    def increasing_for_all_alpha(self) -> bool:
        return len(self.increasing_candidates) == len(ALPHA_CANDIDATES)


def _monotone_prefix(log_r: np.ndarray, decreasing: bool, strict: bool = False,
                     tol: float = 1e-12) -> int:
    """Length of the longest prefix on which ``exp(log_r)`` is monotone.

    Non-strict mode tolerates a relative wobble ``tol`` per step; strict mode
    demands each step move by more than ``tol``.
    """
    step = np.diff(log_r)
    if strict:
        bad = step >= -tol if decreasing else step <= tol
    elif decreasing:
        bad = step > tol
    else:
        bad = step < -tol
    hits = np.flatnonzero(bad)
    return log_r.size if hits.size == 0 else int(hits[0]) + 1


def classify_regularity(m: Modulus, scan_grid: int = 2048, x_min: float = 1e-300) -> RegularityReport:
    """Certify the regularity hypotheses used by the growth theorems on a
    log-spaced grid of ``scan_grid`` points in ``[x_min, domain_end]``."""
    if scan_grid < 16:
        raise DomainError("scan_grid must be >= 16")
    D = m.domain_end
    xs = np.geomspace(x_min, D, scan_grid)
    w = m._raw(xs)
    with np.errstate(divide="ignore"):
        logw = np.log(w)
    logx = np.log(xs)
    need = max(2, scan_grid // 4)

    mono: dict[float, float] = {}
    incr: dict[float, float] = {}
    for a in ALPHA_CANDIDATES:
        r = logw - a * logx
        p = _monotone_prefix(r, decreasing=True, strict=True)
        if p >= need:
            mono[a] = float(xs[p - 1])
        p = _monotone_prefix(r, decreasing=False, strict=True)
        if p >= need:
            incr[a] = float(xs[p - 1])

    alpha_monotone = None
    if mono:
        keys = sorted(mono)
        a_mid = round(0.5 * (keys[0] + keys[-1]), 6)
        r = logw - a_mid * logx
        alpha_monotone = (a_mid, float(xs[_monotone_prefix(r, decreasing=True, strict=True) - 1]))
    alpha_increasing = None
    if incr:
        a_top = max(incr)
        alpha_increasing = (a_top, incr[a_top])

    ratio_dec = _monotone_prefix(logw - logx, decreasing=True) == scan_grid

    # omega(x)/(x log(e/x)) against log(e/x) on the smallest third of the grid
    L = 1.0 - logx
    tail = slice(0, scan_grid // 3)
    lr = logw[tail] - logx[tail] - np.log(L[tail])
    slope = float(np.polyfit(np.log(L[tail]), lr, 1)[0])
    if slope < -0.2:
        limit_class = "zero"
    elif slope <= 0.2:
        limit_class = "bounded"
    else:
        limit_class = "unbounded"

    claim4_holds = None
    claim4_min = None
    if alpha_monotone is not None:
        a_mid, cut = alpha_monotone
        c = 1.0 - a_mid
        x = np.geomspace(max(1.0, 1.0 / cut) * (1 + 1e-6), 1e12, 400)
        h = 1e-6 * x
        lam_p = ((x + h) * m._raw(1.0 / (x + h)) - (x - h) * m._raw(1.0 / (x - h))) / (2 * h)
        rhs = c * m._raw(1.0 / x)
        q = lam_p / rhs
        claim4_min = float(q.min())
        claim4_holds = bool(claim4_min >= 1.0 - 1e-5)

    return RegularityReport(
        alpha_monotone=alpha_monotone,
        alpha_increasing=alpha_increasing,
        ratio_over_x_decreasing=bool(ratio_dec),
        xlog_limit_class=limit_class,
        monotone_candidates=mono,
        increasing_candidates=incr,
        xlog_tail_slope=slope,
        claim4_holds=claim4_holds,
        claim4_min_ratio=claim4_min,
        scan_resolution=scan_grid,
        scan_range=(x_min, D),
    )


def subadditivity_defect(m: Modulus, grid) -> float:
    """``max(omega(d1+d2) - omega(d1) - omega(d2))`` over grid pairs with
    ``d1 + d2 <= domain_end`` (non-positive for a subadditive modulus)."""
    g = np.asarray(grid, dtype=float)
    d1, d2 = np.meshgrid(g, g)
    s = d1 + d2
    ok = s <= m.domain_end
    w = m._raw(g)
    defect = np.where(ok, m._raw(np.minimum(s, m.domain_end)) - w[None, :] - w[:, None], -math.inf)
    return float(defect.max())
