"""Command-line interface.

Exit status: 0 on success, 1 when any verdict fails, 2 on configuration
or construction errors.  Data goes to stdout (or ``--output``) as CSV;
the resolved configuration and diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from . import config as cfgmod
from .bounds import BoundSpec, Theorem, bound_value, parse_constants
from .dynamics import GridSpec, growth_sequence
from .errors import GrowthGapError
from .lab import Scenario, expand_sweep, run, run_many, write_report
from .modulus import Modulus, classify_regularity, concave_majorant


def num(v) -> str:
    """Shortest round-trip decimal form of a double."""
    return repr(float(v))


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _emit(text: str, output: str | None):
    if output:
        with open(output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def _echo(cfg: dict[str, str]):
    for k in sorted(cfg):
        print(f"# {k} = {cfg[k]}", file=sys.stderr)


def _add_map_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("map")
    g.add_argument("--config", help="scenario file supplying modulus.* and diffeo.* keys (default: none)")
    g.add_argument("--diffeo", choices=cfgmod.DIFFEO_KINDS, help="map constructor (default: identity)")
    g.add_argument("--modulus", help="modulus, e.g. holder:0.5, lipschitz, tabulated:file.csv (default: none)")
    g.add_argument("--epsilon", type=float, help="construction parameter epsilon (default: 0.25 or 0.5)")
    g.add_argument("--sign", choices=("contracting", "expanding"), help="from_modulus direction (default: contracting)")
    g.add_argument("--k-min", type=int, help="sharpness k_min (default: 32)")
    g.add_argument("--c-abs", type=float, help="sharpness membership ceiling (default: 1000)")
    g.add_argument("--blocks", help="pasted blocks a:b:eps,... (default: none)")
    g.add_argument("--block-k-min", type=int, help="k_min for pasted blocks (default: 1024)")


def _map_config(args) -> tuple[dict[str, str], Path | None]:
    cfg: dict[str, str] = {}
    base = None
    if args.config:
        cfg = cfgmod.load(args.config)
        base = Path(args.config).parent
    flags = {"diffeo.kind": args.diffeo, "modulus": args.modulus, "diffeo.epsilon": args.epsilon,
             "diffeo.sign": args.sign, "diffeo.k_min": args.k_min, "diffeo.c_abs": args.c_abs,
             "diffeo.blocks": args.blocks, "diffeo.block_k_min": args.block_k_min}
    for k, v in flags.items():
        if v is not None:
            cfg[k] = str(v)
    if "modulus" in cfg:
        for k in [k for k in cfg if k.startswith("modulus.")]:
            del cfg[k]
    cfg.setdefault("diffeo.kind", "identity")
    return cfg, base


def _build_map(args):
    cfg, base = _map_config(args)
    _echo(cfg)
    has_mod = "modulus" in cfg or bool(cfgmod.section(cfg, "modulus"))
    m = cfgmod.build_modulus(cfg, base) if has_mod else None
    return cfgmod.build_diffeo(cfgmod.section(cfg, "diffeo"), m), m, cfg


def cmd_modulus(args) -> int:
    m = Modulus.parse(args.modulus, Path.cwd())
    _echo({"modulus": args.modulus, "points": str(args.points)})
    rep = classify_regularity(m)
    print(f"# label = {m.label()}", file=sys.stderr)
    print(f"# alpha_monotone = {rep.alpha_monotone}", file=sys.stderr)
    print(f"# alpha_increasing = {rep.alpha_increasing}", file=sys.stderr)
    print(f"# xlog_limit_class = {rep.xlog_limit_class}", file=sys.stderr)
    star = concave_majorant(m)
    d = np.geomspace(1e-12, m.domain_end, args.points)
    rows = [(num(x), num(m(x)), num(star(min(x, star.domain_end)))) for x in d]
    _emit(_csv_text(("delta", "omega", "majorant"), rows), args.output)
    return 0


def cmd_construct(args) -> int:
    f, _, _ = _build_map(args)
    rows = [(k, v if isinstance(v, str) else repr(v)) for k, v in f.description.items()]
    rows.append(("fixed_points", " ".join(num(x) for x in f.fixed_points)))
    _emit(_csv_text(("key", "value"), rows), args.output)
    return 0


def cmd_describe(args) -> int:
    f, _, _ = _build_map(args)
    x, fx, fp = f.sample(args.points)
    _emit(_csv_text(("x", "f", "fprime"), [(num(a), num(b), num(c)) for a, b, c in zip(x, fx, fp)]), args.output)
    return 0


def cmd_growth(args) -> int:
    f, _, _ = _build_map(args)
    _echo({"nmax": str(args.nmax), "grid": str(args.grid), "refine": str(args.refine),
           "orbit_closed": str(args.orbit_closed).lower()})
    grid = GridSpec(size=args.grid, refine=args.refine, orbit_closed=args.orbit_closed)
    recs = growth_sequence(f, args.nmax, grid, args.workers)
    rows = [(r.n, num(r.log_gamma), num(r.log_sup), num(r.log_inf), num(r.arg_sup), num(r.arg_inf)) for r in recs]
    _emit(_csv_text(("n", "log_gamma", "log_sup", "log_inf", "arg_sup", "arg_inf"), rows), args.output)
    return 0


def _parse_n_list(text: str) -> list[int]:
    out = []
    for part in cfgmod.parse_list(text):
        try:
            v = int(part)
        except ValueError:
            raise GrowthGapError(f"--n-list entries must be integers, got {part!r}") from None
        if v < 1:
            raise GrowthGapError("--n-list entries must be >= 1")
        out.append(v)
    return out


def cmd_bounds(args) -> int:
    m = Modulus.parse(args.modulus, Path.cwd())
    consts = parse_constants(args.constants or "")
    _echo({"theorem": args.theorem, "modulus": args.modulus,
           "constants": ",".join(f"{k}={v!r}" for k, v in sorted(consts.items())), "n_list": args.n_list})
    spec = BoundSpec(Theorem(args.theorem), m, consts)
    rows = [(n, num(bound_value(spec, n))) for n in _parse_n_list(args.n_list)]
    _emit(_csv_text(("n", "bound_value"), rows), args.output)
    return 0


def cmd_verify(args) -> int:
    s = Scenario.load(args.scenario)
    if args.output:
        s.output = None
    _echo(s.config)
    report = run(s, args.workers)
    if args.output:
        write_report(report, Path(args.output))
    sys.stderr.write(report.to_text())
    sys.stdout.write(report.to_csv())
    return 0 if report.passed else 1


def cmd_sweep(args) -> int:
    base = cfgmod.load(args.scenario)
    configs = expand_sweep(base, args.set or [])
    for c in configs:
        print(f"# scenario {c['name']} sha256={cfgmod.config_hash(c)}", file=sys.stderr)
    reports = run_many(configs, Path(args.scenario).parent, args.workers)
    rows = [[r.name] + row for r in reports for row in r.csv_rows()]
    _emit(_csv_text(("scenario", "check", "verdict", "value", "target", "tolerance", "window"), rows), args.output)
    for r in reports:
        sys.stderr.write(r.to_text())
    return 0 if all(r.passed for r in reports) else 1


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = argparse.ArgumentParser(prog="growthgap", description=__doc__.splitlines()[0], formatter_class=fmt)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    cpu = os.cpu_count() or 1

    sp = sub.add_parser("modulus", help="tabulate a modulus and its concave majorant", formatter_class=fmt)
    sp.add_argument("--modulus", required=True, help="modulus, e.g. holder:0.5")
    sp.add_argument("--points", type=int, default=65, help="log-spaced sample count")
    sp.add_argument("--output", help="CSV path (default: stdout)")
    sp.set_defaults(func=cmd_modulus)

    sp = sub.add_parser("construct", help="build a map and print its provenance", formatter_class=fmt)
    _add_map_flags(sp)
    sp.add_argument("--output", help="CSV path (default: stdout)")
    sp.set_defaults(func=cmd_construct)

    sp = sub.add_parser("describe", help="sample x, f(x), f'(x)", formatter_class=fmt)
    _add_map_flags(sp)
    sp.add_argument("--points", type=int, default=1025, help="uniform sample count on [0, 1]")
    sp.add_argument("--output", help="CSV path (default: stdout)")
    sp.set_defaults(func=cmd_describe)

    sp = sub.add_parser("growth", help="compute the growth sequence", formatter_class=fmt)
    _add_map_flags(sp)
    sp.add_argument("--nmax", type=int, default=256, help="largest iterate")
    sp.add_argument("--grid", type=int, default=4096, help="base probe count")
    sp.add_argument("--refine", type=int, default=40, help="ternary-equivalent refinement steps per doubling")
    sp.add_argument("--orbit-closed", action="store_true",
                    help="maximise over whole probe orbits (exactly submultiplicative; cost ~ grid*nmax^2)")
    sp.add_argument("--workers", type=int, default=cpu, help="threads (GROWTHGAP_WORKERS overrides)")
    sp.add_argument("--output", help="CSV path (default: stdout)")
    sp.set_defaults(func=cmd_growth)

    sp = sub.add_parser("bounds", help="evaluate a growth bound", formatter_class=fmt)
    sp.add_argument("--theorem", required=True, choices=[t.value for t in Theorem])
    sp.add_argument("--modulus", required=True, help="modulus, e.g. holder:0.5")
    sp.add_argument("--constants", default="", help="name=value list, e.g. C=1,c=0.5,epsilon=0.1")
    sp.add_argument("--n-list", required=True, help="comma-separated n values")
    sp.add_argument("--output", help="CSV path (default: stdout)")
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("verify", help="run a scenario file", formatter_class=fmt)
    sp.add_argument("scenario", help="scenario file")
    sp.add_argument("--workers", type=int, default=cpu, help="threads (GROWTHGAP_WORKERS overrides)")
    sp.add_argument("--output", help="report stem; writes STEM.txt and STEM.csv (default: output.path)")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("sweep", help="run a scenario over a parameter grid", formatter_class=fmt)
    sp.add_argument("scenario", help="base scenario file")
    sp.add_argument("--set", action="append", metavar="KEY=V1,V2",
                    help="parameter axis; repeat for a cartesian product (default: none)")
    sp.add_argument("--workers", type=int, default=cpu, help="threads (GROWTHGAP_WORKERS overrides)")
    sp.add_argument("--output", help="CSV path (default: stdout)")
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (GrowthGapError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
