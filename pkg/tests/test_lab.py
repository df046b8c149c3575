import math
from pathlib import Path

import numpy as np
import pytest

from growthgap import diffeo as D
from growthgap import lab
from growthgap.dynamics import GrowthRecord
from growthgap.errors import SpecError
from growthgap.modulus import Modulus

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
H = Modulus.holder(0.5)


def _records(values):
    return [GrowthRecord(n, float(v), float(v), -float(v), 0.0, 1.0) for n, v in enumerate(values, 1)]


def test_scenario_parsing_errors():
    with pytest.raises(SpecError):
        lab.Scenario.from_config({"checks.list": "thm2, bogus"})
    with pytest.raises(SpecError):
        lab.Scenario.from_config({"checks.list": "thm2, thm2"})
    with pytest.raises(SpecError):
        lab.Scenario.from_config({"checks.list": "thm2", "tolerance.nope": "1"})


def test_missing_modulus_skips_not_passes():
    s = lab.Scenario.from_config({"diffeo.kind": "identity", "growth.n_max": "16", "growth.grid": "64",
                                  "checks.list": "thm4, claim9, orbit_identity"})
    rep = lab.run(s, write=False)
    assert [r.verdict for r in rep.results] == ["skipped"] * 3
    assert rep.passed


def test_moebius_scenario(tmp_path):
    s = lab.Scenario.load(SCENARIOS / "moebius.cfg")
    s.output = str(tmp_path / "moebius")
    rep = lab.run(s)
    assert rep.passed
    assert rep.result("moebius_oracle").value <= 0.01
    assert (tmp_path / "moebius.txt").read_text().endswith("overall: pass\n")
    assert (tmp_path / "moebius.csv").read_text().startswith("check,verdict,value")


def test_identity_scenario():
    rep = lab.run(lab.Scenario.load(SCENARIOS / "identity.cfg"), write=False)
    assert rep.passed


def test_submultiplicative_detects_violation():
    lg = np.arange(1, 65, dtype=float) ** 2  # superadditive in n
    res = lab.check_submultiplicative(_records(lg))
    assert res.verdict == "fail"
    assert lab.check_submultiplicative(_records(np.log1p(np.arange(1, 65)))).passed


def test_gamma_check_hyperbolic_and_parabolic():
    mob = D.moebius_test()
    recs = _records(np.arange(1, 65) * math.log(2))
    assert lab.check_gamma(mob, recs).passed
    ident = D.identity()
    assert lab.check_gamma(ident, _records(np.zeros(64))).passed
    assert not lab.check_gamma(ident, _records(np.arange(1, 65) * 0.2)).passed


def test_lemma3_check():
    assert lab.check_lemma3(H).passed


def test_orbit_identity_check():
    res = lab.check_orbit_identity(D.sharpness_family(H, 0.5, 32), 2000)
    assert res.passed and res.value <= 1e-12


def test_thm7_target_is_local_exponent():
    # n^0.9 * n^-0.5
    assert lab.thm7_target(H, 0.1, 1000, 10000) == pytest.approx(0.4, rel=1e-9)


def test_sharpness_inconclusive_on_short_range():
    from growthgap.bounds import BoundSpec
    res = lab.check_sharpness(_records([1.0] * 8), BoundSpec("thm7_lower", H, {"epsilon": 0.1}), "thm7")
    assert res.verdict == "skipped"


def test_report_formats():
    rep = lab.ScenarioReport("x", [lab.CheckResult("thm2", "pass", 0.5, 1.0, 1.5, "[1,2]")], {"a": "b"})
    assert rep.to_csv() == "check,verdict,value,target,tolerance,window\nthm2,pass,0.5,1.0,1.5,\"[1,2]\"\n"
    assert "[PASS   ] thm2" in rep.to_text()
    with pytest.raises(KeyError):
        rep.result("thm3")


def test_expand_sweep():
    cfgs = lab.expand_sweep({"name": "s", "a": "0"}, ["a=1,2", "checks.list=thm2,thm4|thm5"])
    assert len(cfgs) == 4
    assert {c["checks.list"] for c in cfgs} == {"thm2,thm4", "thm5"}
    assert cfgs[0]["name"] == "s[a=1;checks.list=thm2,thm4]"
    with pytest.raises(SpecError):
        lab.expand_sweep({}, ["novalue"])


def test_run_records_check_errors_as_failures():
    s = lab.Scenario.from_config({"modulus": "lipschitz", "diffeo.kind": "from_modulus", "diffeo.epsilon": "0.4",
                                  "growth.n_max": "2", "growth.grid": "64", "checks.list": "thm2"})
    rep = lab.run(s, write=False)
    assert rep.results[0].verdict == "fail"
    assert "SpecError" in rep.results[0].detail


def test_identity_records_fail_sharpness():
    from growthgap.bounds import BoundSpec
    res = lab.check_sharpness(_records(np.zeros(64)), BoundSpec("thm7_lower", H, {"epsilon": 0.1}), "thm7")
    assert res.verdict == "fail"


def test_report_deterministic_across_workers():
    cfg = {"modulus": "holder:0.5", "diffeo.kind": "from_modulus", "growth.n_max": "32", "growth.grid": "256",
           "checks.list": "thm5, submultiplicative"}
    a = lab.run(lab.Scenario.from_config(cfg), workers=1, write=False)
    b = lab.run(lab.Scenario.from_config(cfg), workers=3, write=False)
    assert a.to_csv() == b.to_csv() and a.to_text() == b.to_text()
