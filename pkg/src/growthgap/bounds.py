"""Growth bounds on ``log Gamma_n`` and fitting of their unnamed constants.

Every bound is written as ``fixed(n) + C * scaled(n)``, or the analogous
lower-bound form, so that the smallest constant consistent with measured
growth can be read off window by window.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dynamics import GrowthRecord
from .errors import SpecError
from .modulus import Modulus, classify_regularity

STABILITY_FACTOR = 1.5


class Theorem(str, enum.Enum):
    THM2 = "thm2"
    THM3 = "thm3"
    THM4 = "thm4"
    THM5 = "thm5"
    COR5_1 = "cor5_1"
    COR5_2 = "cor5_2"
    THM6_LOWER = "thm6_lower"
    THM7_LOWER = "thm7_lower"

    @property
    def is_lower(self) -> bool:
        return self in (Theorem.THM6_LOWER, Theorem.THM7_LOWER)


REQUIRED: dict[Theorem, tuple[str, ...]] = {
    Theorem.THM2: ("C",),
    Theorem.THM3: ("C", "alpha"),
    Theorem.THM4: ("C",),
    Theorem.THM5: ("C",),
    Theorem.COR5_1: ("C",),
    Theorem.COR5_2: ("C",),
    Theorem.THM6_LOWER: ("c", "epsilon"),
    Theorem.THM7_LOWER: ("c", "epsilon"),
}


@dataclass(frozen=True)
class BoundSpec:
    theorem: Theorem
    modulus: Modulus
    constants: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "theorem", Theorem(self.theorem))

    def missing(self) -> list[str]:
        return [k for k in REQUIRED[self.theorem] if k not in self.constants]

    def with_constants(self, **kw) -> "BoundSpec":
        return BoundSpec(self.theorem, self.modulus, {**self.constants, **kw})

    def _need(self, *names):
        miss = [k for k in names if k not in self.constants]
        if miss:
            raise SpecError(f"{self.theorem.value} needs constants {', '.join(miss)}")
        return [float(self.constants[k]) for k in names]


def _inv_n(m: Modulus, n: float) -> float:
    return min(1.0 / n, m.domain_end)


def _log_n_over_inverse(m: Modulus, n: float, numerator: float) -> float:
    """``log(n / omega^{-1}(numerator/n))`` with the clamped inverse."""
    return math.log(n) - math.log(float(m.inverse(numerator / n)))


def _split(spec: BoundSpec, n: float) -> tuple[float, float]:
    """``(fixed, scaled)`` with ``bound = fixed + K * scaled`` and K the fitted constant."""
    m = spec.modulus
    th = spec.theorem
    if th is Theorem.THM2:
        return 2.0 * math.log(n), 1.0
    if th is Theorem.THM3:
        (alpha,) = spec._need("alpha")
        return 0.0, n ** (1.0 - alpha)
    if th in (Theorem.THM4, Theorem.COR5_2):
        return _log_n_over_inverse(m, n, 2.0), n * float(m(_inv_n(m, n)))
    if th is Theorem.THM5:
        return 0.0, n * float(m(_inv_n(m, n)))
    if th is Theorem.COR5_1:
        return 0.0, _log_n_over_inverse(m, n, 2.0)
    if th is Theorem.THM7_LOWER:
        (eps,) = spec._need("epsilon")
        return 0.0, n ** (1.0 - eps) * float(m(_inv_n(m, n)))
    raise SpecError(f"{th.value} has no linear split")


def upper_bound(spec: BoundSpec, n: float) -> float:
    """Bound on ``log Gamma_n``; thm2 returns ``log C + 2 log n``."""
    if spec.theorem.is_lower:
        raise SpecError(f"{spec.theorem.value} is a lower bound")
    if n < 1:
        raise ValueError("n must be >= 1")
    (C,) = spec._need("C")
    if spec.theorem is Theorem.THM2:
        if C <= 0:
            raise SpecError("thm2 needs C > 0")
        return math.log(C) + 2.0 * math.log(n)
    spec._need(*REQUIRED[spec.theorem])
    fixed, scaled = _split(spec, n)
    return fixed + C * scaled


def lower_bound(spec: BoundSpec, n: float) -> float:
    if not spec.theorem.is_lower:
        raise SpecError(f"{spec.theorem.value} is an upper bound")
    if n < 1:
        raise ValueError("n must be >= 1")
    c, eps = spec._need("c", "epsilon")
    if spec.theorem is Theorem.THM6_LOWER:
        return (1.0 - eps) * _log_n_over_inverse(spec.modulus, n, c)
    return c * _split(spec, n)[1]


def bound_value(spec: BoundSpec, n: float) -> float:
    return lower_bound(spec, n) if spec.theorem.is_lower else upper_bound(spec, n)


@dataclass(frozen=True)
class FitReport:
    constant: float
    early: float
    late: float
    stable: bool
    windows: tuple[tuple[int, int], tuple[int, int]]
    factor: float = STABILITY_FACTOR


def _windows(n_max: int) -> tuple[tuple[int, int], tuple[int, int]]:
    return (max(1, n_max // 4), n_max // 2), (n_max // 2, n_max)


def _thm6_c(spec: BoundSpec, n: float, log_gamma: float) -> float:
    """Largest ``c`` with ``(1-eps) log(n / omega^{-1}(c/n)) <= log Gamma_n``.

    Solving for ``c``: ``omega^{-1}(c/n) >= n exp(-L/(1-eps))``, i.e.
    ``c <= n * omega(n exp(-L/(1-eps)))``.
    """
    (eps,) = spec._need("epsilon")
    m = spec.modulus
    t = n * math.exp(-log_gamma / (1.0 - eps))
    return n * float(m(min(t, m.domain_end)))


def fit_constant(records: Sequence[GrowthRecord], spec: BoundSpec,
                 factor: float = STABILITY_FACTOR) -> FitReport:
    """Per-window extreme constant over ``[N/4, N/2]`` and ``[N/2, N]``.

    Upper bounds: ``C* = max (log Gamma_n - fixed)/scaled``; stable when the
    late window does not exceed ``factor`` times the early one.  Lower
    bounds: ``c* = min`` of the analogous ratio; stable when it stays
    positive and does not drop by more than ``factor``.
    """
    if not records:
        raise SpecError("no records to fit")
    by_n = {r.n: r.log_gamma for r in records}
    n_max = max(by_n)
    (e0, e1), (l0, l1) = _windows(n_max)
    if e1 <= e0 or l1 <= l0 or any(k not in by_n for k in (e0, e1, l1)):
        raise SpecError("records must cover the dyadic windows [N/4, N/2] and [N/2, N]")
    th = spec.theorem

    def ratio(n: int) -> float:
        lg = by_n[n]
        if th is Theorem.THM6_LOWER:
            return _thm6_c(spec, n, lg)
        fixed, scaled = _split(spec, n)
        if th is Theorem.THM2:
            return math.exp(lg - fixed)
        if scaled == 0:
            raise SpecError(f"degenerate denominator at n={n}")
        return (lg - fixed) / scaled

    def window(a: int, b: int) -> float:
        vals = [ratio(n) for n in range(a, b + 1) if n in by_n]
        return min(vals) if th.is_lower else max(vals)

    early, late = window(e0, e1), window(l0, l1)
    if th.is_lower:
        const = min(early, late)
        stable = late > 0 and late * factor >= early
    else:
        # C* <= 0 means the C-free part of the bound already holds
        const = max(early, late, 0.0)
        stable = late <= factor * early if early > 0 else late <= 0
    return FitReport(const, early, late, bool(stable), ((e0, e1), (l0, l1)), factor)


def local_exponent(n: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of ``log values`` against ``log n``."""
    x = np.log(np.asarray(n, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    if x.size < 2 or not np.all(np.isfinite(y)):
        raise ValueError("need at least two positive values")
    return float(np.polyfit(x, y, 1)[0])


class Cor5Case(str, enum.Enum):
    CASE1 = "case1"
    CASE2 = "case2"
    NEITHER = "neither"


def corollary5_applicability(m: Modulus) -> Cor5Case:
    cls = classify_regularity(m).xlog_limit_class
    if cls == "zero":
        return Cor5Case.CASE2
    if cls == "bounded":
        return Cor5Case.CASE1
    return Cor5Case.NEITHER


def parse_constants(text: str) -> dict[str, float]:
    """``"C=1,c=0.5"`` -> ``{"C": 1.0, "c": 0.5}``; names are case sensitive."""
    out: dict[str, float] = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        key, sep, val = part.partition("=")
        if not sep:
            raise SpecError(f"constant {part!r} is not of the form name=value")
        key = key.strip()
        if key == "eps":
            key = "epsilon"
        try:
            out[key] = float(val)
        except ValueError:
            raise SpecError(f"constant {key} has non-numeric value {val!r}") from None
    return out
