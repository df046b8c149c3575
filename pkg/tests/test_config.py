import pytest

from growthgap import config as C
from growthgap.errors import SpecError


def test_parse_text_comments_and_quotes():
    cfg = C.parse_text('modulus.kind = "holder"\nmodulus.alpha = 0.5  # exponent\n\n# note\n')
    assert cfg == {"modulus.kind": "holder", "modulus.alpha": "0.5"}


def test_parse_text_rejects_garbage():
    with pytest.raises(SpecError):
        C.parse_text("just words")


def test_hash_ignores_order():
    a = C.parse_text("a = 1\nb = 2\n")
    b = C.parse_text("b = 2\na = 1\n")
    assert C.config_hash(a) == C.config_hash(b)
    assert C.dump(a) == "a = 1\nb = 2\n"


def test_getters():
    cfg = {"x": "2", "y": "2.5", "t": "yes"}
    assert C.get_int(cfg, "x") == 2
    assert C.get_float(cfg, "y") == 2.5
    assert C.get_bool(cfg, "t") is True
    assert C.get_float(cfg, "z", 1.0) == 1.0
    with pytest.raises(SpecError):
        C.get_int(cfg, "y")
    with pytest.raises(SpecError):
        C.get_float(cfg, "missing")


def test_blocks():
    assert C.parse_blocks("0.55:0.95:0.5, 0.05:0.45:0.25") == [(0.55, 0.95, 0.5), (0.05, 0.45, 0.25)]
    with pytest.raises(SpecError):
        C.parse_blocks("0.1:0.2")


def test_build_diffeo_kinds():
    m = C.build_modulus({"modulus": "holder:0.5"})
    assert C.build_diffeo({}, None).kind == "identity"
    assert C.build_diffeo({"kind": "from_modulus", "epsilon": "0.25"}, m)(0.04) == pytest.approx(0.04 - 0.04 ** 1.5 * 2 / 3)
    with pytest.raises(SpecError):
        C.build_diffeo({"kind": "sharpness"}, None)
    with pytest.raises(SpecError):
        C.build_diffeo({"kind": "nope"}, m)


def test_build_modulus_sections():
    m = C.build_modulus({"modulus.kind": "holder", "modulus.alpha": "0.5"})
    assert m(0.25) == pytest.approx(0.5)
    with pytest.raises(SpecError):
        C.build_modulus({})
