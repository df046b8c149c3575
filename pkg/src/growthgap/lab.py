"""Scenario runner: construction, growth computation and verdicts.

A scenario names a modulus, a map, a growth budget and a list of checks.
Every check yields exactly one :class:`CheckResult`; failed preconditions
give ``skipped`` and never a pass.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import __version__
from . import config as cfgmod
from .bounds import BoundSpec, Cor5Case, Theorem, corollary5_applicability, fit_constant, local_exponent
from .diffeo import Diffeo, claim1_ratio_bounds, claim2_margins, membership_constant
from .dynamics import GridSpec, GrowthRecord, claim9_profile, gamma_estimate, growth_sequence, orbit, orbit_records
from .errors import GrowthGapError, SpecError
from .modulus import Modulus, classify_regularity, concave_majorant, majorant_grid

CHECKS = ("thm2", "thm3", "thm4", "thm5", "cor5", "thm6_sharp", "thm7_sharp", "claim1", "claim2",
          "claim9", "lemma3", "submultiplicative", "group_closure", "gamma_characterization",
          "moebius_oracle", "orbit_identity")

TOLERANCES: dict[str, float] = {
    "exponent_margin": 0.05,
    "stability_factor": 1.5,
    "oracle_rel": 0.01,
    "orbit_abs": 1e-12,
    "gamma_trend_max": 1.05,
    "gamma_monotone_rel": 1e-9,
    "fixed_point_slope": 1e-8,
    "sandwich_abs": 1e-9,
    "submult_rel": 1e-6,
    "claim_abs": 1e-9,
    "thm6_epsilon": 0.1,
    "closure_grid_log2": 20,
    "closure_delta_lo": 1e-5,
    "closure_delta_hi": 1e-3,
}

PASS, FAIL, SKIPPED = "pass", "fail", "skipped"


@dataclass(frozen=True)
class CheckResult:
    check: str
    verdict: str
    value: float = math.nan
    target: float = math.nan
    tolerance: float = math.nan
    window: str = ""
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict == PASS


@dataclass
class Scenario:
    name: str
    config: dict[str, str]
    modulus: Modulus | None
    diffeo_cfg: dict[str, str]
    partner_cfg: dict[str, str]
    n_max: int
    grid: GridSpec
    seed: int
    checks: list[str]
    tolerances: dict[str, float]
    output: str | None = None
    base_dir: Path | None = None

    @classmethod
    def from_config(cls, cfg: Mapping[str, str], base_dir: Path | None = None) -> "Scenario":
        cfg = dict(cfg)
        checks = cfgmod.parse_list(cfg.get("checks.list", cfg.get("checks", "")))
        unknown = [c for c in checks if c not in CHECKS]
        if unknown:
            raise SpecError(f"unknown checks: {', '.join(unknown)}")
        if len(set(checks)) != len(checks):
            raise SpecError("a check is listed twice")
        tol = dict(TOLERANCES)
        for k, v in cfgmod.section(cfg, "tolerance").items():
            if k not in TOLERANCES:
                raise SpecError(f"unknown tolerance {k!r}")
            tol[k] = cfgmod.get_float({k: v}, k)
        has_mod = "modulus" in cfg or bool(cfgmod.section(cfg, "modulus"))
        grid_cfg = cfgmod.section(cfg, "growth")
        return cls(
            name=cfg.get("name", "scenario"),
            config=cfg,
            modulus=cfgmod.build_modulus(cfg, base_dir) if has_mod else None,
            diffeo_cfg=cfgmod.section(cfg, "diffeo"),
            partner_cfg=cfgmod.section(cfg, "partner"),
            n_max=cfgmod.get_int(grid_cfg, "n_max", 256),
            grid=GridSpec(size=cfgmod.get_int(grid_cfg, "grid", 4096),
                          refine=cfgmod.get_int(grid_cfg, "refine", 40),
                          orbit_closed=cfgmod.get_bool(grid_cfg, "orbit_closed", False)),
            seed=cfgmod.get_int(grid_cfg, "seed", 0),
            checks=checks,
            tolerances=tol,
            output=cfg.get("output.path"),
            base_dir=base_dir,
        )

    @classmethod
    def load(cls, path) -> "Scenario":
        p = Path(path)
        return cls.from_config(cfgmod.load(p), p.parent)


@dataclass
class ScenarioReport:
    name: str
    results: list[CheckResult]
    provenance: dict[str, str] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.verdict != FAIL for r in self.results)

    def result(self, check: str) -> CheckResult:
        for r in self.results:
            if r.check == check:
                return r
        raise KeyError(check)

    def to_text(self) -> str:
        lines = [f"scenario: {self.name}"]
        lines += [f"{k}: {self.provenance[k]}" for k in sorted(self.provenance)]
        for r in self.results:
            lines.append(f"[{r.verdict.upper():7s}] {r.check}: value={_fmt(r.value)} target={_fmt(r.target)} "
                         f"tolerance={_fmt(r.tolerance)} window={r.window or '-'}"
                         + (f"  ({r.detail})" if r.detail else ""))
        lines.append(f"overall: {'pass' if self.passed else 'fail'}")
        return "\n".join(lines) + "\n"

    def to_csv(self, scenario_column: bool = False) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["check", "verdict", "value", "target", "tolerance", "window"]
        w.writerow((["scenario"] if scenario_column else []) + head)
        for row in self.csv_rows():
            w.writerow(([self.name] if scenario_column else []) + row)
        return buf.getvalue()

    def csv_rows(self) -> list[list[str]]:
        return [[r.check, r.verdict, _fmt(r.value), _fmt(r.target), _fmt(r.tolerance), r.window]
                for r in self.results]


def _fmt(v: float) -> str:
    return repr(float(v))


# -- individual checks ------------------------------------------------------------


def _window_str(w) -> str:
    (a, b), (c, d) = w
    return f"[{a},{b}]|[{c},{d}]"


def fit_check(name: str, records, spec: BoundSpec, tol: Mapping[str, float]) -> CheckResult:
    rep = fit_constant(records, spec, tol["stability_factor"])
    return CheckResult(name, PASS if rep.stable else FAIL, rep.late, max(rep.early, 0.0) * rep.factor,
                       rep.factor, _window_str(rep.windows),
                       f"C*={rep.constant:.6g} early={rep.early:.6g} late={rep.late:.6g}")


def thm7_target(m: Modulus, epsilon: float, n_lo: int, n_hi: int) -> float:
    """Local exponent of ``n^(1-eps) omega(1/n)`` on ``[n_lo, n_hi]``."""
    ns = np.geomspace(n_lo, n_hi, 32)
    vals = ns ** (1.0 - epsilon) * m(np.minimum(1.0 / ns, m.domain_end))
    return local_exponent(ns, vals)


def check_sharpness(records: Sequence[GrowthRecord], spec: BoundSpec, kind: str,
                    tol: Mapping[str, float] = TOLERANCES, min_n: int = 16) -> CheckResult:
    """Lower-bound sharpness verdict over the last dyadic window.

    thm7: slope of ``log log Gamma_n`` against ``log n`` must reach the
    local exponent of ``n^(1-eps) omega(1/n)`` less the margin.
    thm6: ``log Gamma_n / log(n / omega^{-1}(c/n))`` must stay above
    ``1 - eps - margin``, with ``c`` fitted on the earlier window.
    """
    name = f"{kind}_sharp"
    margin = tol["exponent_margin"]
    if not records or records[-1].n < min_n:
        return CheckResult(name, SKIPPED, detail="inconclusive: n range too short")
    n_max = records[-1].n
    by_n = {r.n: r.log_gamma for r in records}
    lo, hi = n_max // 2, n_max
    ns = np.array([n for n in range(lo, hi + 1) if n in by_n])
    lg = np.array([by_n[n] for n in ns])
    eps = float(spec.constants["epsilon"])
    window = f"[{lo},{hi}]"
    if kind == "thm7":
        target = thm7_target(spec.modulus, eps, lo, hi)
        if not np.all(lg > 0):
            return CheckResult(name, FAIL, math.nan, target, margin, window, "log Gamma_n not positive")
        slope = local_exponent(ns, lg)
        ok = slope >= target - margin
        return CheckResult(name, PASS if ok else FAIL, slope, target, margin, window)
    if kind == "thm6":
        early = fit_constant(records, spec.with_constants(c=1.0)).early
        if not (early > 0 and math.isfinite(early)):
            return CheckResult(name, FAIL, math.nan, 1.0 - eps, margin, window, "no positive c fits")
        m = spec.modulus
        denom = np.log(ns) - np.log(np.asarray(m.inverse(early / ns), dtype=float))
        ratio = float(np.min(lg / denom))
        target = 1.0 - eps
        ok = ratio >= target - margin
        return CheckResult(name, PASS if ok else FAIL, ratio, target, margin, window, f"c={early:.6g}")
    raise SpecError(f"unknown sharpness kind {kind!r}")


def _decade_constants(F: Diffeo, m: Modulus, tol: Mapping[str, float]) -> tuple[float, float]:
    n_x = 2 ** int(tol["closure_grid_log2"]) + 1
    lo, hi = tol["closure_delta_lo"], tol["closure_delta_hi"]
    mid = math.sqrt(lo * hi)
    small = membership_constant(F, m, np.geomspace(lo, mid, 12), n_x)
    large = membership_constant(F, m, np.geomspace(mid, hi, 12), n_x)
    return small, large


def check_group_closure(f: Diffeo, g: Diffeo, m: Modulus, tol: Mapping[str, float] = TOLERANCES) -> CheckResult:
    """``f o g`` and ``f^{-1}`` have finite membership constants that do not
    grow by more than the stability factor from the coarser to the finer
    delta decade."""
    factor = tol["stability_factor"]
    worst, values, notes = 0.0, [], []
    ok = True
    for label, F in (("f*g", f.compose(g)), ("f^-1", f.inverse())):
        small, large = _decade_constants(F, m, tol)
        values.append(max(small, large))
        fin = math.isfinite(small) and math.isfinite(large)
        stable = fin and (small <= factor * large if large > 0 else small == 0)
        ok &= stable
        if large > 0 and fin:
            worst = max(worst, small / large)
        notes.append(f"{label}: C={small:.6g}/{large:.6g}")
    return CheckResult("group_closure", PASS if ok else FAIL, max(values), factor, factor,
                       f"[{tol['closure_delta_lo']:g},{tol['closure_delta_hi']:g}]",
                       "; ".join(notes) + f"; worst ratio {worst:.4g}")


def expected_gamma(f: Diffeo) -> float:
    fp = np.asarray(f.fprime(np.asarray(f.fixed_points, dtype=float)), dtype=float)
    return float(np.max(np.maximum(fp, 1.0 / fp)))


def check_gamma(f: Diffeo, records: Sequence[GrowthRecord], tol: Mapping[str, float] = TOLERANCES) -> CheckResult:
    """Parabolic maps: dyadic nth roots non-increasing and final value below
    the trend ceiling.  Otherwise: estimate matches ``max f'(xi)^(+-1)``."""
    expect = expected_gamma(f)
    est, roots = gamma_estimate(records)
    n_max = records[-1].n
    window = f"[1,{n_max}]"
    if abs(expect - 1.0) <= tol["fixed_point_slope"]:
        dy = [2 ** k for k in range(int(math.log2(n_max)) + 1)]
        seq = roots[np.array(dy) - 1]
        mono = bool(np.all(seq[1:] <= seq[:-1] * (1 + tol["gamma_monotone_rel"])))
        ok = mono and est <= tol["gamma_trend_max"]
        return CheckResult("gamma_characterization", PASS if ok else FAIL, est, 1.0,
                           tol["gamma_trend_max"] - 1.0, window, f"dyadic roots monotone={mono}")
    ok = abs(est - expect) <= tol["oracle_rel"] * expect
    return CheckResult("gamma_characterization", PASS if ok else FAIL, est, expect,
                       tol["oracle_rel"], window)


def check_submultiplicative(records: Sequence[GrowthRecord], seed: int = 0, pairs: int = 200,
                            tol: Mapping[str, float] = TOLERANCES) -> CheckResult:
    lg = np.array([r.log_gamma for r in records])
    n_max = lg.size
    if n_max < 2:
        return CheckResult("submultiplicative", SKIPPED, detail="need n_max >= 2")
    rng = np.random.default_rng(seed)
    a = rng.integers(1, n_max, size=pairs)
    b = rng.integers(1, n_max - a + 1)
    slack = math.log1p(tol["submult_rel"])
    excess = lg[a + b - 1] - lg[a - 1] - lg[b - 1] - slack
    worst = float(np.max(excess))
    ok = worst <= 0 and bool(np.all(lg >= 0))
    return CheckResult("submultiplicative", PASS if ok else FAIL, worst, 0.0, tol["submult_rel"],
                       f"[1,{n_max}]", f"{pairs} pairs, min log Gamma={lg.min():.3g}")


def check_moebius(records: Sequence[GrowthRecord], tol: Mapping[str, float] = TOLERANCES) -> CheckResult:
    n_top = min(50, records[-1].n)
    worst = max(abs(records[n - 1].log_gamma / (n * math.log(2.0)) - 1.0) for n in range(1, n_top + 1))
    est, _ = gamma_estimate(records[:n_top])
    worst = max(worst, abs(est / 2.0 - 1.0))
    ok = worst <= tol["oracle_rel"]
    return CheckResult("moebius_oracle", PASS if ok else FAIL, worst, 0.0, tol["oracle_rel"], f"[1,{n_top}]",
                       f"gamma={est:.8g}")


def check_orbit_identity(f: Diffeo, n_max: int, tol: Mapping[str, float] = TOLERANCES) -> CheckResult:
    a = f.description["a_eps"]
    k0 = int(math.ceil(1.0 / a - 1e-9))
    k = np.arange(k0, max(k0, 10_000) + 1)
    err_step = float(np.max(np.abs(f.func(1.0 / k) - 1.0 / (k + 1))))
    steps = max(1, min(n_max, 10_000))
    traj = orbit(f, 1.0 / k0, steps)
    j = np.arange(steps + 1)
    err_orbit = float(np.max(np.abs(traj.points - 1.0 / (k0 + j)) / np.maximum(j, 1)))
    ok = err_step <= tol["orbit_abs"] and err_orbit <= tol["orbit_abs"]
    return CheckResult("orbit_identity", PASS if ok else FAIL, max(err_step, err_orbit), 0.0, tol["orbit_abs"],
                       f"k=[{k0},{k[-1]}]", f"step={err_step:.3g} orbit/N={err_orbit:.3g}")


def check_lemma3(m: Modulus, tol: Mapping[str, float] = TOLERANCES, grid_size: int = 4096) -> CheckResult:
    star = concave_majorant(m, grid_size)
    x = majorant_grid(m, grid_size)
    w, ws = m(x), star(np.minimum(x, star.domain_end))
    lo = float(np.max(w - ws))
    hi = float(np.max(ws - 2.0 * w))
    worst = max(lo, hi)
    ok = worst <= tol["sandwich_abs"]
    return CheckResult("lemma3", PASS if ok else FAIL, worst, 0.0, tol["sandwich_abs"], f"{x.size} points")


def check_claim9(f: Diffeo, m: Modulus, n_max: int, tol: Mapping[str, float] = TOLERANCES) -> CheckResult:
    x0 = 0.5 * (f.window[1] if f.window else 0.25)
    prof = claim9_profile(f, m, x0, n_max)
    e = prof[n_max // 4 - 1:n_max // 2]
    l = prof[n_max // 2 - 1:]
    ratio = float(l.max() / e.max())
    ok = bool(np.all(np.isfinite(prof))) and ratio <= tol["stability_factor"]
    return CheckResult("claim9", PASS if ok else FAIL, float(prof.max()), tol["stability_factor"],
                       tol["stability_factor"], f"[{n_max // 4},{n_max // 2}]|[{n_max // 2},{n_max}]",
                       f"late/early={ratio:.6g}")


# -- scenario orchestration ---------------------------------------------------------


def _needs_records(checks: Sequence[str]) -> bool:
    return any(c in checks for c in ("thm2", "thm3", "thm4", "thm5", "cor5", "thm6_sharp", "thm7_sharp",
                                     "submultiplicative", "gamma_characterization", "moebius_oracle"))


def _skip(check: str, why: str) -> CheckResult:
    return CheckResult(check, SKIPPED, detail=why)


def _run_check(check: str, s: Scenario, f: Diffeo, records, workers) -> CheckResult:
    tol = s.tolerances
    m = s.modulus
    kind = f.kind
    if check in ("thm2", "thm3", "thm4", "thm5", "cor5", "thm6_sharp", "thm7_sharp", "claim2", "claim9",
                 "lemma3", "group_closure") and m is None:
        return _skip(check, "scenario has no modulus")
    if check == "thm2":
        return fit_check(check, records, BoundSpec(Theorem.THM2, m), tol)
    if check == "thm3":
        if m.alpha is None:
            return _skip(check, "needs a holder modulus")
        return fit_check(check, records, BoundSpec(Theorem.THM3, m, {"alpha": m.alpha}), tol)
    if check == "thm4":
        return fit_check(check, records, BoundSpec(Theorem.THM4, m), tol)
    if check == "thm5":
        if classify_regularity(m).alpha_monotone is None:
            return _skip(check, "omega(x)/x^alpha is not decreasing for any scanned alpha")
        if abs(expected_gamma(f) - 1.0) > tol["fixed_point_slope"]:
            return _skip(check, "map has a hyperbolic fixed point")
        return fit_check(check, records, BoundSpec(Theorem.THM5, m), tol)
    if check == "cor5":
        case = corollary5_applicability(m)
        if case is Cor5Case.NEITHER:
            return _skip(check, "modulus is outside both cases")
        th = Theorem.COR5_1 if case is Cor5Case.CASE1 else Theorem.COR5_2
        res = fit_check(check, records, BoundSpec(th, m), tol)
        return CheckResult(res.check, res.verdict, res.value, res.target, res.tolerance, res.window,
                           f"{case.value}; {res.detail}")
    if check == "thm6_sharp":
        if kind != "from_modulus":
            return _skip(check, "needs a from_modulus construction")
        reg = classify_regularity(m)
        if reg.alpha_increasing is None or reg.xlog_limit_class != "zero":
            return _skip(check, "modulus fails the increasing-ratio or vanishing x log(e/x) hypothesis")
        spec = BoundSpec(Theorem.THM6_LOWER, m, {"epsilon": tol["thm6_epsilon"]})
        res = check_sharpness(records, spec, "thm6", tol)
        note = "boundary case (lipschitz)" if m.kind.value == "lipschitz" else ""
        return CheckResult(res.check, res.verdict, res.value, res.target, res.tolerance, res.window,
                           "; ".join(filter(None, (res.detail, note))))
    if check == "thm7_sharp":
        if kind != "sharpness":
            return _skip(check, "needs a sharpness construction")
        eps = f.description["epsilon"]
        k0 = int(math.ceil(1.0 / f.description["a_eps"] - 1e-9))
        orb = orbit_records(f, 1.0 / k0, s.n_max)
        merged = [GrowthRecord(r.n, max(r.log_gamma, o.log_gamma), r.log_sup, r.log_inf, r.arg_sup, r.arg_inf)
                  for r, o in zip(records, orb)]
        return check_sharpness(merged, BoundSpec(Theorem.THM7_LOWER, m, {"epsilon": eps}), "thm7", tol)
    if check == "claim1":
        if f.window is None or kind not in ("from_modulus", "sharpness"):
            return _skip(check, "needs a construction window")
        lo, hi = f.window
        rmin, rmax, blo, bhi = claim1_ratio_bounds(f, lo, hi)
        ok = rmin >= blo - tol["claim_abs"] and rmax <= bhi + tol["claim_abs"]
        return CheckResult(check, PASS if ok else FAIL, rmax, bhi, tol["claim_abs"], f"({lo:g},{hi:g}]",
                           f"ratio in [{rmin:.6g},{rmax:.6g}] vs [{blo:.6g},{bhi:.6g}]")
    if check == "claim2":
        if kind != "from_modulus":
            return _skip(check, "needs a from_modulus construction")
        dv, vv, used = claim2_margins(f, m, f.window[1])
        if used == 0:
            return _skip(check, "no point has I_x inside the window")
        worst = max(dv, vv)
        ok = worst <= 1.0 + tol["claim_abs"]
        return CheckResult(check, PASS if ok else FAIL, worst, 1.0, tol["claim_abs"], f"{used} points",
                           f"deriv/3={dv:.6g} value/4={vv:.6g}")
    if check == "claim9":
        if kind != "from_modulus":
            return _skip(check, "needs a from_modulus construction")
        if s.n_max < 8:
            return _skip(check, "n_max too small for two windows")
        return check_claim9(f, m, s.n_max, tol)
    if check == "lemma3":
        return check_lemma3(m, tol)
    if check == "submultiplicative":
        return check_submultiplicative(records, s.seed, tol=tol)
    if check == "group_closure":
        g = cfgmod.build_diffeo(s.partner_cfg, m) if s.partner_cfg else f
        return check_group_closure(f, g, m, tol)
    if check == "gamma_characterization":
        return check_gamma(f, records, tol)
    if check == "moebius_oracle":
        if kind != "moebius_test":
            return _skip(check, "needs the moebius_test map")
        return check_moebius(records, tol)
    if check == "orbit_identity":
        if kind != "sharpness":
            return _skip(check, "needs a sharpness construction")
        return check_orbit_identity(f, s.n_max, tol)
    raise SpecError(f"unknown check {check!r}")


def run(s: Scenario, workers: int | None = None, write: bool = True) -> ScenarioReport:
    """Construct, compute growth once, then evaluate every listed check.

    Construction errors propagate; a check that raises is recorded as a
    failure with the error message.
    """
    f = cfgmod.build_diffeo(s.diffeo_cfg, s.modulus)
    records = growth_sequence(f, s.n_max, s.grid, workers) if _needs_records(s.checks) else []
    results = []
    for check in s.checks:
        try:
            results.append(_run_check(check, s, f, records, workers))
        except GrowthGapError as exc:
            results.append(CheckResult(check, FAIL, detail=f"{type(exc).__name__}: {exc}"))
    prov = {
        "config_sha256": cfgmod.config_hash(s.config),
        "tool_version": __version__,
        "n_max": str(s.n_max),
        "grid": f"size={s.grid.size} refine={s.grid.refine} orbit_closed={s.grid.orbit_closed}",
        "map": f.kind,
    }
    report = ScenarioReport(s.name, results, prov)
    if write and s.output:
        out = Path(s.output)
        if s.base_dir is not None and not out.is_absolute():
            out = s.base_dir / out
        write_report(report, out)
    return report


def write_report(report: ScenarioReport, stem: Path):
    stem.parent.mkdir(parents=True, exist_ok=True)
    with open(stem.with_suffix(".txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.to_text())
    with open(stem.with_suffix(".csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.to_csv())


def expand_sweep(cfg: Mapping[str, str], settings: Sequence[str]) -> list[dict[str, str]]:
    """Cartesian product of ``key=v1,v2`` overrides applied to ``cfg``.

    Values containing commas (lists) can be given with ``|`` as separator
    between alternatives instead: ``checks.list=thm2,thm4|thm5``.
    """
    axes: list[tuple[str, list[str]]] = []
    for item in settings:
        key, sep, vals = item.partition("=")
        if not sep or not key.strip():
            raise SpecError(f"--set expects key=v1,v2, got {item!r}")
        alts = vals.split("|") if "|" in vals else cfgmod.parse_list(vals)
        if not alts:
            raise SpecError(f"--set {key} has no values")
        axes.append((key.strip(), [a.strip() for a in alts]))
    out = []
    for combo in itertools.product(*(v for _, v in axes)):
        c = dict(cfg)
        parts = []
        for (k, _), v in zip(axes, combo):
            c[k] = v
            parts.append(f"{k}={v}")
        c["name"] = cfg.get("name", "scenario") + ("[" + ";".join(parts) + "]" if parts else "")
        out.append(c)
    return out


def run_many(configs: Sequence[Mapping[str, str]], base_dir: Path | None = None,
             workers: int | None = None) -> list[ScenarioReport]:
    return [run(Scenario.from_config(c, base_dir), workers, write=False) for c in configs]
